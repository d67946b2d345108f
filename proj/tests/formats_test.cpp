#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ssdda/checkpoint.hpp"
#include "ssdda/kvconfig.hpp"
#include "ssdda/metrics.hpp"
#include "ssdda/pnm.hpp"
#include "ssdda/rng.hpp"

using namespace ssdda;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path p = fs::temp_directory_path() / "ssdda_formats_test";
    fs::create_directories(p);
    return p;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("PPM images survive write -> read -> write byte-identically") {
    const fs::path dir = temp_dir();
    Rng rng(4);
    SegImage img(9, 13, 3);
    for (auto& v : img.data)
        v = rng.uniform01();
    const fs::path p1 = dir / "a.ppm", p2 = dir / "b.ppm";
    write_ppm(p1, img);
    const SegImage back = read_ppm(p1);
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5 / 255.0 + 1e-12);
    write_ppm(p2, back);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("PGM label maps are lossless, including the ignore value") {
    const fs::path dir = temp_dir();
    LabelMap l(5, 7);
    for (std::size_t i = 0; i < l.data.size(); ++i)
        l.data[i] = static_cast<std::uint8_t>(i % 5);
    l.at(2, 3) = kIgnoreLabel;
    const fs::path p = dir / "labels.pgm";
    write_pgm(p, l);
    CHECK(read_pgm(p) == l);
}

TEST_CASE("PNM headers accept comments and reject wrong maxval or truncation") {
    const fs::path dir = temp_dir();
    {
        std::ofstream out(dir / "comment.pgm", std::ios::binary);
        out << "P5\n# a comment line\n2 1\n255\n";
        out.put(7);
        out.put(9);
    }
    const LabelMap l = read_pgm(dir / "comment.pgm");
    CHECK(l.at(0, 0) == 7);
    CHECK(l.at(0, 1) == 9);

    {
        std::ofstream out(dir / "max16.pgm", std::ios::binary);
        out << "P5\n1 1\n65535\n";
        out.put(1);
        out.put(1);
    }
    CHECK_THROWS_AS(read_pgm(dir / "max16.pgm"), FormatError);

    {
        std::ofstream out(dir / "short.ppm", std::ios::binary);
        out << "P6\n2 2\n255\n";
        out.put(0); // 11 bytes missing
    }
    CHECK_THROWS_AS(read_ppm(dir / "short.ppm"), FormatError);

    CHECK_THROWS_AS(read_ppm(dir / "does_not_exist.ppm"), IoError);
}

TEST_CASE("checkpoints round-trip bit-exactly and re-save byte-identically") {
    const fs::path dir = temp_dir();
    Rng rng(9);
    ParamSet p;
    std::vector<double> w(24);
    for (auto& v : w)
        v = static_cast<float>(rng.uniform(-3.0, 3.0)); // f32-representable
    p.add("conv1.weight", {2, 3, 2, 2}, w);
    p.add("conv1.bias", {2}, {0.0f, -1.25f});
    p.add("state.iteration", {1}, {1234.0});

    const fs::path c1 = dir / "a.bin", c2 = dir / "b.bin";
    save_checkpoint(c1, p);
    const ParamSet q = load_checkpoint(c1);
    CHECK(bit_equal(p, q));
    save_checkpoint(c2, q);
    CHECK(slurp(c1) == slurp(c2));
}

TEST_CASE("checkpoint loader rejects corruption, bad magic, and trailing bytes") {
    const fs::path dir = temp_dir();
    ParamSet p;
    p.add("w", {2}, {1.0, 2.0});
    const fs::path path = dir / "c.bin";
    save_checkpoint(path, p);

    auto bytes = slurp(path);
    auto corrupt = bytes;
    corrupt[10] = static_cast<char>(corrupt[10] ^ 0x40); // flip a payload bit
    spit(dir / "corrupt.bin", corrupt);
    CHECK_THROWS_AS(load_checkpoint(dir / "corrupt.bin"), FormatError);

    auto badmagic = bytes;
    badmagic[0] = 'X';
    spit(dir / "badmagic.bin", badmagic);
    CHECK_THROWS_AS(load_checkpoint(dir / "badmagic.bin"), FormatError);

    auto trailing = bytes;
    trailing.push_back(0);
    spit(dir / "trailing.bin", trailing);
    CHECK_THROWS_AS(load_checkpoint(dir / "trailing.bin"), FormatError);

    spit(dir / "tiny.bin", {'S', 'S'});
    CHECK_THROWS_AS(load_checkpoint(dir / "tiny.bin"), FormatError);
}

TEST_CASE("config text reaches a fixed point after one parse/serialize cycle") {
    const std::string text = "# training setup\n"
                             "lr0 = 2.5e-4   \n"
                             "\n"
                             "mix.variant =   complexmix # inline comment\n"
                             "network.hidden = 8,16,16\n";
    const KvConfig a = KvConfig::parse(text);
    const std::string s1 = a.serialize();
    const KvConfig b = KvConfig::parse(s1);
    CHECK(s1 == b.serialize());
    CHECK(a.items() == b.items());
    CHECK(a.get_string("mix.variant") == "complexmix"); // inline comment stripped
    CHECK(a.get_double("lr0") == 2.5e-4);
}

TEST_CASE("config parse errors carry line numbers; typed getters validate") {
    CHECK_THROWS_WITH_AS(KvConfig::parse("a = 1\nbroken line\n"),
                         doctest::Contains("line 2"), InvalidConfig);
    KvConfig kv = KvConfig::parse("n = 12\nx = 0.5\ns = hello\n");
    CHECK(kv.get_int("n") == 12);
    CHECK(kv.get_double("x") == 0.5);
    CHECK(kv.get_double("n") == 12.0);
    CHECK_THROWS_AS(kv.get_int("s"), InvalidConfig);
    CHECK_THROWS_AS(kv.get_int("missing"), InvalidConfig);
    CHECK(kv.get_int("missing", 5) == 5);
    CHECK(kv.get_string("missing", "d") == "d");
    kv.set_double("y", 0.1);
    CHECK(kv.get_double("y") == 0.1); // shortest-round-trip formatting
}

TEST_CASE("set/serialize keeps values verbatim and doubles round-trip") {
    KvConfig kv;
    kv.set("a", "1e-3");
    kv.set_int("b", -7);
    kv.set_double("c", 2.5e-4);
    const KvConfig back = KvConfig::parse(kv.serialize());
    CHECK(back.get_string("a") == "1e-3");
    CHECK(back.get_int("b") == -7);
    CHECK(back.get_double("c") == 2.5e-4);
    CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("metrics rows format and parse across all field-presence shapes") {
    MetricsRow eval_row;
    eval_row.iter = 0;
    eval_row.has_miou = true;
    eval_row.val_miou = 0.25;
    const std::string s1 = format_metrics_row(eval_row);
    CHECK(s1 == "0,,,,,,0.25");
    const MetricsRow r1 = parse_metrics_row(s1);
    CHECK(!r1.has_losses);
    CHECK(r1.has_miou);
    CHECK(r1.val_miou == 0.25);

    MetricsRow step;
    step.iter = 17;
    step.has_losses = true;
    step.l_s = 0.5;
    step.l_t = 0.25;
    step.l_u = 0.125;
    step.total = 0.875;
    step.lr = 1e-4;
    const MetricsRow r2 = parse_metrics_row(format_metrics_row(step));
    CHECK(r2.iter == 17);
    CHECK(r2.has_losses);
    CHECK(!r2.has_miou);
    CHECK(r2.l_u == 0.125);
    CHECK(r2.lr == 1e-4);

    CHECK_THROWS_AS(parse_metrics_row("1,2,3"), FormatError);
    CHECK_THROWS_AS(parse_metrics_row("x,,,,,,"), FormatError);
}

TEST_CASE("MetricsWriter appends under the pinned header and read_metrics enforces it") {
    const fs::path dir = temp_dir();
    const fs::path p = dir / "metrics.csv";
    fs::remove(p);
    {
        MetricsWriter w(p);
        MetricsRow r;
        r.iter = 1;
        r.has_losses = true;
        r.l_s = 1.0;
        r.total = 1.0;
        r.lr = 1e-4;
        w.write(r);
        w.flush();
    }
    {
        MetricsWriter w(p, /*append=*/true);
        MetricsRow r;
        r.iter = 2;
        r.has_losses = true;
        r.l_s = 0.5;
        r.total = 0.5;
        r.lr = 9e-5;
        w.write(r);
    }
    const auto rows = read_metrics(p);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].iter == 1);
    CHECK(rows[1].iter == 2);

    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    CHECK(header == kMetricsHeader);

    const fs::path bad = dir / "bad.csv";
    {
        std::ofstream out(bad);
        out << "iteration,loss\n1,2\n";
    }
    CHECK_THROWS_AS(read_metrics(bad), FormatError);
}
