#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ssdda/cli.hpp"
#include "ssdda/pnm.hpp"
#include "ssdda/train.hpp"

using namespace ssdda;
namespace fs = std::filesystem;

namespace {

int run(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.emplace_back("ssdda");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const auto& a : full)
        argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

// One tiny dataset shared by all CLI cases (12x12, 4 source / 8 target).
const fs::path& tiny_data() {
    static const fs::path root = [] {
        const fs::path dir = fs::temp_directory_path() / "ssdda_cli_data";
        fs::remove_all(dir);
        REQUIRE(run({"gen-data", "--out", dir.string(), "--seed", "5", "--n-source", "4",
                     "--n-target", "8", "--size", "12", "--labels", "3"}) == kExitOk);
        return dir;
    }();
    return root;
}

// Small network + short run so train invocations stay fast.
const fs::path& tiny_config() {
    static const fs::path path = [] {
        const fs::path p = fs::temp_directory_path() / "ssdda_cli_tiny.cfg";
        std::ofstream out(p, std::ios::trunc);
        out << "network.hidden = 2\niterations = 3\n";
        return p;
    }();
    return path;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("cli: usage problems exit with the usage code") {
    CHECK(run({}) == kExitUsage);                         // a subcommand is required
    CHECK(run({"trian"}) == kExitUsage);                  // unknown subcommand
    CHECK(run({"train"}) == kExitUsage);                  // missing required flags
    CHECK(run({"gen-data", "--out", "/tmp/x", "--frobnicate"}) == kExitUsage);
    CHECK(run({"--help"}) == kExitOk);
    CHECK(run({"train", "--help"}) == kExitOk);
}

TEST_CASE("cli: gen-data writes a loadable dataset plus requested split files") {
    const fs::path& data = tiny_data();
    CHECK(fs::exists(data / "manifest.txt"));
    CHECK(fs::exists(data / "images" / "source_0000.ppm"));
    CHECK(fs::exists(data / "labels" / "target_0007.pgm"));
    CHECK(fs::exists(data / "split_3_5.txt")); // --labels 3, seed 5
    CHECK(!fs::exists(data / ".ssdda.lock"));  // lock released on success
    const DatasetManifest manifest = load_manifest(data);
    CHECK(manifest.n_source() == 4);
    CHECK(manifest.n_target() == 8);
}

TEST_CASE("cli: train -> eval round trip on the tiny dataset") {
    const fs::path& data = tiny_data();
    const fs::path out = fs::temp_directory_path() / "ssdda_cli_run";
    fs::remove_all(out);
    REQUIRE(run({"train", "--data", data.string(), "--out", out.string(), "--labels", "3",
                 "--seed", "9", "--config", tiny_config().string()}) == kExitOk);
    CHECK(fs::exists(out / "checkpoint.bin"));
    CHECK(fs::exists(out / "metrics.csv"));
    CHECK(fs::exists(out / "split.txt"));
    CHECK(!fs::exists(out / ".ssdda.lock"));

    // the sidecar manifest records the effective setup for reproduction
    const RunManifest rm = read_run_manifest(out / "checkpoint.bin.meta.txt");
    CHECK(rm.seed == 9);
    CHECK(rm.version != "");
    CHECK(rm.started != "");
    CHECK(rm.finished != "");
    CHECK(rm.dataset_checksum == file_checksum(data / "manifest.txt"));
    CHECK(rm.config.get_string("mode") == "dual");
    CHECK(rm.config.get_string("data.root") == data.string());
    TrainConfig tc;
    NetworkConfig nc;
    apply_kv(rm.config, tc, nc);
    CHECK(tc.iterations == 3);
    CHECK(tc.seed == 9);
    CHECK(nc.hidden_channels == std::vector<int>{2});

    for (const char* section : {"val", "labeled", "unlabeled"})
        CHECK(run({"eval", "--checkpoint", (out / "checkpoint.bin").string(), "--data",
                   data.string(), "--split", (out / "split.txt").string(), "--section",
                   section}) == kExitOk);
    CHECK(run({"eval", "--checkpoint", (out / "checkpoint.bin").string(), "--data",
               data.string(), "--split", (out / "split.txt").string(), "--classes", "0,1"}) ==
          kExitOk);
    CHECK(run({"eval", "--checkpoint", (out / "checkpoint.bin").string(), "--data",
               data.string(), "--split", (out / "split.txt").string(), "--section",
               "weird"}) == kExitData);
}

TEST_CASE("cli: identical seed and config give byte-identical runs") {
    const fs::path& data = tiny_data();
    const fs::path a = fs::temp_directory_path() / "ssdda_cli_rep_a";
    const fs::path b = fs::temp_directory_path() / "ssdda_cli_rep_b";
    fs::remove_all(a);
    fs::remove_all(b);
    for (const fs::path& out : {a, b})
        REQUIRE(run({"train", "--data", data.string(), "--out", out.string(), "--labels", "3",
                     "--seed", "4", "--config", tiny_config().string()}) == kExitOk);
    CHECK(slurp(a / "checkpoint.bin") == slurp(b / "checkpoint.bin"));
    CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
    CHECK(slurp(a / "split.txt") == slurp(b / "split.txt"));
}

TEST_CASE("cli: data problems exit with the data code") {
    const fs::path& data = tiny_data();
    CHECK(run({"train", "--data", "/nonexistent/nowhere", "--out",
               (fs::temp_directory_path() / "ssdda_cli_nowhere").string()}) == kExitData);
    CHECK(run({"eval", "--checkpoint", "/nonexistent/ckpt.bin", "--data", data.string(),
               "--split", (data / "split_3_5.txt").string()}) == kExitData);
    // asking for more labeled targets than exist is a split error
    CHECK(run({"train", "--data", data.string(), "--out",
               (fs::temp_directory_path() / "ssdda_cli_toobig").string(), "--labels", "50",
               "--config", tiny_config().string()}) == kExitData);
}

TEST_CASE("cli: a stale lock file blocks a second run into the same directory") {
    const fs::path& data = tiny_data();
    const fs::path out = fs::temp_directory_path() / "ssdda_cli_locked";
    fs::remove_all(out);
    fs::create_directories(out);
    std::ofstream(out / ".ssdda.lock") << "12345\n";
    CHECK(run({"train", "--data", data.string(), "--out", out.string(), "--labels", "3",
               "--config", tiny_config().string()}) == kExitData);
    CHECK(fs::exists(out / ".ssdda.lock")); // a foreign lock is never removed
}

TEST_CASE("cli: SSDDA_SEED supplies the default seed") {
    const fs::path& data = tiny_data();
    const fs::path out = fs::temp_directory_path() / "ssdda_cli_envseed";
    fs::remove_all(out);
    ::setenv("SSDDA_SEED", "42", 1);
    const int rc = run({"train", "--data", data.string(), "--out", out.string(), "--labels",
                        "3", "--config", tiny_config().string()});
    ::unsetenv("SSDDA_SEED");
    REQUIRE(rc == kExitOk);
    const RunManifest rm = read_run_manifest(out / "checkpoint.bin.meta.txt");
    CHECK(rm.seed == 42);

    // an explicit flag still wins over the environment
    const fs::path out2 = fs::temp_directory_path() / "ssdda_cli_envseed2";
    fs::remove_all(out2);
    ::setenv("SSDDA_SEED", "42", 1);
    const int rc2 = run({"train", "--data", data.string(), "--out", out2.string(), "--labels",
                         "3", "--seed", "7", "--config", tiny_config().string()});
    ::unsetenv("SSDDA_SEED");
    REQUIRE(rc2 == kExitOk);
    CHECK(read_run_manifest(out2 / "checkpoint.bin.meta.txt").seed == 7);
}

TEST_CASE("cli: mix-preview renders mask and composites") {
    const fs::path& data = tiny_data();
    const fs::path out = fs::temp_directory_path() / "ssdda_cli_mix";
    fs::remove_all(out);
    REQUIRE(run({"mix-preview", "--image-a", (data / "images" / "target_0000.ppm").string(),
                 "--label-a", (data / "labels" / "target_0000.pgm").string(), "--image-b",
                 (data / "images" / "target_0001.ppm").string(), "--label-b",
                 (data / "labels" / "target_0001.pgm").string(), "--out", out.string(),
                 "--seed", "3"}) == kExitOk);
    const LabelMap mask = read_pgm(out / "mask.pgm");
    bool all_binary = true;
    for (const std::uint8_t v : mask.data)
        all_binary = all_binary && (v == 0 || v == 255);
    CHECK(all_binary);
    const SegImage mixed = read_ppm(out / "mixed.ppm");
    CHECK(mixed.height == 12);
    CHECK(mixed.width == 12);
    const LabelMap mixed_label = read_pgm(out / "mixed_label.pgm");
    CHECK(mixed_label.height == 12);

    // complexmix with a block count larger than the canvas is a usage-level
    // config error surfaced through the data exit code
    CHECK(run({"mix-preview", "--image-a", (data / "images" / "target_0000.ppm").string(),
               "--label-a", (data / "labels" / "target_0000.pgm").string(), "--image-b",
               (data / "images" / "target_0001.ppm").string(), "--label-b",
               (data / "labels" / "target_0001.pgm").string(), "--out",
               (out / "again").string(), "--variant", "complexmix", "--p", "40"}) ==
          kExitData);
}

TEST_CASE("cli: diverging training exits with the numeric code") {
    const fs::path& data = tiny_data();
    const fs::path out = fs::temp_directory_path() / "ssdda_cli_diverge";
    fs::remove_all(out);
    CHECK(run({"train", "--data", data.string(), "--out", out.string(), "--labels", "3",
               "--config", tiny_config().string(), "--iterations", "40", "--lr0", "1e12"}) ==
          kExitNumeric);
}

TEST_CASE("cli: ablate writes table and csv") {
    const fs::path& data = tiny_data();
    const fs::path out = fs::temp_directory_path() / "ssdda_cli_ablate";
    fs::remove_all(out);
    REQUIRE(run({"ablate", "--data", data.string(), "--out", out.string(), "--labels", "3",
                 "--seeds", "1", "--config", tiny_config().string(), "--iterations", "2"}) ==
            kExitOk);
    CHECK(fs::exists(out / "ablation.txt"));
    const std::vector<char> csv = slurp(out / "ablation.csv");
    const std::string text(csv.begin(), csv.end());
    CHECK(text.find("mode,n_labeled,seed,final_val_miou") != std::string::npos);
    CHECK(text.find("dual,3,1,") != std::string::npos);
}
