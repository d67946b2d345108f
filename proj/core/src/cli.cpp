#include "ssdda/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <vector>

#include <zlib.h>

#include "CLI11.hpp"

#include "ssdda/checkpoint.hpp"
#include "ssdda/data.hpp"
#include "ssdda/errors.hpp"
#include "ssdda/eval.hpp"
#include "ssdda/mixing.hpp"
#include "ssdda/pnm.hpp"
#include "ssdda/version.hpp"

namespace ssdda {

namespace {

std::string iso_utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw InvalidConfig(what + ": not an unsigned integer: " + s);
    return v;
}

// Seed fallback when neither flag nor config file provides one.
std::uint64_t env_default_seed() {
    if (const char* env = std::getenv("SSDDA_SEED"))
        return parse_u64(env, "SSDDA_SEED");
    return 1;
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const std::string& what) {
    std::vector<T> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const std::string tok =
            s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        T v{};
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size())
            throw InvalidConfig(what + ": bad list element: " + tok);
        out.push_back(v);
        if (comma == std::string::npos)
            break;
        start = comma + 1;
    }
    if (out.empty())
        throw InvalidConfig(what + ": empty list");
    return out;
}

} // namespace

std::string file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", crc);
    return buf;
}

void write_run_manifest(const std::filesystem::path& path, const RunManifest& rm) {
    KvConfig kv;
    for (const auto& [key, value] : rm.config.items())
        kv.set("config." + key, value);
    kv.set("dataset.checksum", rm.dataset_checksum);
    kv.set("run.version", rm.version);
    kv.set("run.started", rm.started);
    kv.set("run.finished", rm.finished);
    kv.set_int("run.seed", static_cast<std::int64_t>(rm.seed));
    kv.save(path);
}

RunManifest read_run_manifest(const std::filesystem::path& path) {
    const KvConfig kv = KvConfig::load(path);
    RunManifest rm;
    for (const auto& [key, value] : kv.items())
        if (key.starts_with("config."))
            rm.config.set(key.substr(7), value);
    rm.dataset_checksum = kv.get_string("dataset.checksum", "");
    rm.version = kv.get_string("run.version", "");
    rm.started = kv.get_string("run.started", "");
    rm.finished = kv.get_string("run.finished", "");
    rm.seed = static_cast<std::uint64_t>(kv.get_int("run.seed", 0));
    return rm;
}

DirLock::DirLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    lock_path_ = dir / ".ssdda.lock";
    const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw IoError("output directory is locked by another invocation (remove " +
                          lock_path_.string() + " if that run is dead)");
        throw IoError("cannot create lock file " + lock_path_.string());
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd, pid.data(), pid.size()) < 0) {
        // best effort; the lock itself is what matters
    }
    ::close(fd);
}

DirLock::~DirLock() {
    std::error_code ec;
    std::filesystem::remove(lock_path_, ec);
}

namespace {

struct TrainSetupFlags {
    std::string config_file;
    std::string mode = "dual";
    std::string mix = "classmix";
    int block_count = 2;
    std::uint64_t seed = 0;
    std::int64_t iterations = 0;
    double lambda = 0.0;
    double lr0 = 0.0;
};

// defaults < config file < explicit flags.
void resolve_train_config(const TrainSetupFlags& f, const CLI::App* cmd, TrainConfig& tc,
                          NetworkConfig& nc) {
    // not every subcommand registers every flag (ablate owns mode and seed
    // itself), so probe before asking for a count
    const auto given = [cmd](const std::string& name) {
        const CLI::Option* opt = cmd->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    tc.seed = env_default_seed();
    if (!f.config_file.empty())
        apply_kv(KvConfig::load(f.config_file), tc, nc);
    if (given("--mode"))
        tc.mode = train_mode_from_string(f.mode);
    if (given("--mix"))
        tc.mix.variant = mix_variant_from_string(f.mix);
    if (given("--p"))
        tc.mix.block_count = f.block_count;
    if (given("--seed"))
        tc.seed = f.seed;
    if (given("--iterations"))
        tc.iterations = f.iterations;
    if (given("--lambda"))
        tc.lambda = f.lambda;
    if (given("--lr0"))
        tc.lr0 = f.lr0;
    tc.validate();
    // nc is validated inside run_training once num_classes is known.
}

int cmd_gen_data(const std::string& out, std::uint64_t seed, int n_source, int n_target,
                 int size, const DomainShift& shift, const std::string& labels_csv,
                 double val_fraction) {
    const DirLock lock(out);
    SceneSpec spec;
    spec.height = spec.width = size;
    const DatasetCounts counts{n_source, n_target};
    const DatasetManifest manifest = generate_dataset(spec, shift, counts, out, seed);
    for (const int n_t : parse_list<int>(labels_csv, "--labels")) {
        const SplitSpec split = make_splits(manifest, n_t, val_fraction, seed);
        save_split(manifest.root /
                       ("split_" + std::to_string(n_t) + "_" + std::to_string(seed) + ".txt"),
                   split);
    }
    std::cout << "generated " << counts.n_source << " source + " << counts.n_target
              << " target scenes under " << out << "\n"
              << "manifest checksum: " << file_checksum(manifest.root / "manifest.txt") << "\n";
    return kExitOk;
}

int cmd_train(const std::string& data, const std::string& out, int labels,
              const std::string& split_file, const std::string& resume,
              const TrainSetupFlags& flags, const CLI::App* cmd) {
    TrainConfig tc;
    NetworkConfig nc;
    resolve_train_config(flags, cmd, tc, nc);

    const DatasetManifest manifest = load_manifest(data);
    const LoadedDataset dataset = load_dataset(manifest);
    SplitSpec split;
    if (!split_file.empty())
        split = load_split(split_file);
    else
        split = make_splits(manifest, labels, 0.25, tc.seed);
    check_split(manifest, split);

    const DirLock lock(out);
    save_split(std::filesystem::path(out) / "split.txt", split);

    RunManifest rm;
    rm.config = to_kv(tc, nc);
    rm.config.set("data.root", data);
    rm.config.set_int("data.labels", static_cast<std::int64_t>(split.labeled.size()));
    rm.dataset_checksum = file_checksum(manifest.root / "manifest.txt");
    rm.version = kVersion;
    rm.seed = tc.seed;
    rm.started = iso_utc_now();

    const TrainResult result = run_training(tc, nc, dataset, split, out, resume);

    rm.finished = iso_utc_now();
    write_run_manifest(result.checkpoint_path.string() + ".meta.txt", rm);

    std::cout << "checkpoint: " << result.checkpoint_path.string() << "\n"
              << "metrics:    " << result.metrics_path.string() << "\n";
    if (std::isnan(result.final_val_miou))
        std::cout << "final val mIoU: n/a (empty val split)\n";
    else
        std::cout << "final val mIoU: " << format_double(result.final_val_miou) << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data,
             const std::string& split_file, const std::string& section,
             const std::string& classes_csv) {
    const ParamSet all = load_checkpoint(checkpoint);
    bool has_student = false;
    for (const auto& e : all.entries)
        has_student |= e.name.starts_with("student.");
    const SegNetwork net = network_from_params(
        has_student ? subset_with_prefix(all, "student.") : all, NetRole::student);

    const DatasetManifest manifest = load_manifest(data);
    const LoadedDataset dataset = load_dataset(manifest);
    const SplitSpec split = load_split(split_file);
    const std::vector<std::string>* ids = nullptr;
    if (section == "val")
        ids = &split.val;
    else if (section == "labeled")
        ids = &split.labeled;
    else if (section == "unlabeled")
        ids = &split.unlabeled;
    else
        throw InvalidConfig("--section must be val, labeled, or unlabeled");
    if (ids->empty())
        throw InvalidSplit("split section '" + section + "' is empty");

    const ConfusionMatrix cm = evaluate_network(net, dataset, *ids);
    const auto ious = iou_per_class(cm);
    const std::vector<int> subset = classes_csv.empty()
                                        ? all_classes(net.config.num_classes)
                                        : parse_list<int>(classes_csv, "--classes");
    for (int c = 0; c < net.config.num_classes; ++c) {
        std::printf("class %d IoU: ", c);
        if (ious[static_cast<std::size_t>(c)])
            std::printf("%.4f\n", *ious[static_cast<std::size_t>(c)]);
        else
            std::printf("undefined\n");
    }
    std::string subset_str;
    for (const int c : subset)
        subset_str += (subset_str.empty() ? "" : ",") + std::to_string(c);
    std::printf("mIoU over classes {%s} on %zu %s images: %.4f\n", subset_str.c_str(),
                ids->size(), section.c_str(), mean_iou(cm, subset));
    return kExitOk;
}

int cmd_mix_preview(const std::string& image_a, const std::string& label_a,
                    const std::string& image_b, const std::string& label_b,
                    const std::string& out, const std::string& variant, int block_count,
                    std::uint64_t seed) {
    const SegImage xa = read_ppm(image_a);
    const SegImage xb = read_ppm(image_b);
    const LabelMap ya = read_pgm(label_a);
    const LabelMap yb = read_pgm(label_b);

    MixConfig mc;
    mc.variant = mix_variant_from_string(variant);
    mc.block_count = block_count;
    mc.rng_seed = seed;
    Rng rng(seed);
    const MixMask mask = make_mask(ya, mc, rng);
    const SegImage mixed = mix_images(xa, xb, mask);
    const LabelMap mixed_label = mix_labels(ya, yb, mask);

    const DirLock lock(out);
    const std::filesystem::path dir(out);
    LabelMap mask_raster(mask.height, mask.width);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        mask_raster.data[i] = mask.data[i] ? 255 : 0;
    write_pgm(dir / "mask.pgm", mask_raster);
    write_ppm(dir / "mixed.ppm", mixed);
    write_pgm(dir / "mixed_label.pgm", mixed_label);
    std::cout << "wrote " << (dir / "mask.pgm").string() << ", "
              << (dir / "mixed.ppm").string() << ", " << (dir / "mixed_label.pgm").string()
              << "\n";
    return kExitOk;
}

int cmd_ablate(const std::string& data, const std::string& out, const std::string& labels_csv,
               const std::string& seeds_csv, const TrainSetupFlags& flags,
               const CLI::App* cmd) {
    TrainConfig base;
    NetworkConfig nc;
    resolve_train_config(flags, cmd, base, nc);
    const auto split_sizes = parse_list<int>(labels_csv, "--labels");
    const auto seeds = parse_list<std::uint64_t>(seeds_csv, "--seeds");

    const DatasetManifest manifest = load_manifest(data);
    const LoadedDataset dataset = load_dataset(manifest);

    const DirLock lock(out);
    const AblationTable table =
        run_ablation(base, nc, manifest, dataset, split_sizes, seeds, out);

    const std::string text = format_ablation_table(table);
    std::cout << text;
    const std::filesystem::path dir(out);
    {
        std::ofstream txt(dir / "ablation.txt", std::ios::trunc);
        txt << text;
    }
    std::ofstream csv(dir / "ablation.csv", std::ios::trunc);
    csv << "mode,n_labeled,seed,final_val_miou\n";
    for (const auto& cell : table.cells)
        for (std::size_t i = 0; i < cell.per_seed_miou.size(); ++i)
            csv << to_string(cell.mode) << ',' << cell.n_labeled << ',' << table.seeds[i]
                << ',' << format_double(cell.per_seed_miou[i]) << '\n';
    if (!csv)
        throw IoError("write failed for " + (dir / "ablation.csv").string());
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"semi-supervised dual-domain adaptation on a synthetic two-domain benchmark"};
    app.require_subcommand(1);
    int exit_code = kExitOk;

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate the synthetic benchmark + splits");
    std::string gen_out;
    std::uint64_t gen_seed = 0;
    int gen_n_source = 500, gen_n_target = 200, gen_size = 64;
    DomainShift gen_shift;
    std::string gen_labels = "8,16,40,80";
    double gen_val_fraction = 0.25;
    gen->add_option("--out", gen_out, "output dataset directory")->required();
    gen->add_option("--seed", gen_seed, "generation seed (default: SSDDA_SEED or 1)");
    gen->add_option("--n-source", gen_n_source, "source image count")->capture_default_str();
    gen->add_option("--n-target", gen_n_target, "target image count")->capture_default_str();
    gen->add_option("--size", gen_size, "canvas height = width")->capture_default_str();
    gen->add_option("--hue", gen_shift.hue_rotation_deg, "target hue rotation, degrees")->capture_default_str();
    gen->add_option("--noise", gen_shift.noise_sigma, "target Gaussian noise sigma")->capture_default_str();
    gen->add_option("--brightness", gen_shift.brightness_gradient,
                    "target brightness gradient amplitude")->capture_default_str();
    gen->add_option("--texture-freq", gen_shift.texture_frequency,
                    "target texture frequency, cycles/image (0 = off)")->capture_default_str();
    gen->add_option("--labels", gen_labels, "comma list of N_t split sizes to write")->capture_default_str();
    gen->add_option("--val-fraction", gen_val_fraction, "validation fraction of targets")->capture_default_str();
    gen->callback([&]() {
        const std::uint64_t seed = gen->count("--seed") ? gen_seed : env_default_seed();
        exit_code = cmd_gen_data(gen_out, seed, gen_n_source, gen_n_target, gen_size, gen_shift,
                                 gen_labels, gen_val_fraction);
    });

    // shared train-ish flags
    const auto add_train_flags = [](CLI::App* cmd, TrainSetupFlags& f, bool with_mode_seed) {
        cmd->add_option("--config", f.config_file, "key = value config file");
        cmd->add_option("--mix", f.mix, "classmix|complexmix")->capture_default_str();
        cmd->add_option("--p", f.block_count, "complexmix block count per axis")->capture_default_str();
        cmd->add_option("--iterations", f.iterations, "training iterations");
        cmd->add_option("--lambda", f.lambda, "consistency loss weight");
        cmd->add_option("--lr0", f.lr0, "initial learning rate");
        if (with_mode_seed) {
            cmd->add_option("--mode", f.mode, "dual|cross-only|intra-only")->capture_default_str();
            cmd->add_option("--seed", f.seed, "run seed (default: SSDDA_SEED or 1)");
        }
    };

    // train
    auto* train = app.add_subcommand("train", "run SSDDA training");
    std::string train_data, train_out, train_split, train_resume;
    int train_labels = 16;
    TrainSetupFlags train_flags;
    train->add_option("--data", train_data, "dataset directory (with manifest.txt)")->required();
    train->add_option("--out", train_out, "run output directory")->required();
    train->add_option("--labels", train_labels, "labeled target count N_t")->capture_default_str();
    train->add_option("--split", train_split, "explicit split file (overrides --labels)");
    train->add_option("--resume", train_resume, "resume from a training checkpoint");
    add_train_flags(train, train_flags, true);
    train->callback([&]() {
        exit_code = cmd_train(train_data, train_out, train_labels, train_split, train_resume,
                              train_flags, train);
    });

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split section");
    std::string eval_ckpt, eval_data, eval_split, eval_section = "val", eval_classes;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--split", eval_split, "split file")->required();
    eval->add_option("--section", eval_section, "val|labeled|unlabeled")->capture_default_str();
    eval->add_option("--classes", eval_classes, "comma list restricting the mIoU mean");
    eval->callback([&]() {
        exit_code = cmd_eval(eval_ckpt, eval_data, eval_split, eval_section, eval_classes);
    });

    // mix-preview
    auto* mix = app.add_subcommand("mix-preview", "write mask / mixed image / mixed label");
    std::string mix_ia, mix_la, mix_ib, mix_lb, mix_out, mix_variant = "classmix";
    int mix_p = 2;
    std::uint64_t mix_seed_flag = 0;
    mix->add_option("--image-a", mix_ia, "first image (PPM)")->required();
    mix->add_option("--label-a", mix_la, "first label map (PGM); the mask source")->required();
    mix->add_option("--image-b", mix_ib, "second image (PPM)")->required();
    mix->add_option("--label-b", mix_lb, "second label map (PGM)")->required();
    mix->add_option("--out", mix_out, "output directory")->required();
    mix->add_option("--variant", mix_variant, "classmix|complexmix")->capture_default_str();
    mix->add_option("--p", mix_p, "complexmix block count per axis")->capture_default_str();
    mix->add_option("--seed", mix_seed_flag, "mask seed (default: SSDDA_SEED or 1)");
    mix->callback([&]() {
        const std::uint64_t seed = mix->count("--seed") ? mix_seed_flag : env_default_seed();
        exit_code =
            cmd_mix_preview(mix_ia, mix_la, mix_ib, mix_lb, mix_out, mix_variant, mix_p, seed);
    });

    // ablate
    auto* ablate = app.add_subcommand("ablate", "mode x N_t ablation over seeds");
    std::string ab_data, ab_out, ab_labels = "8,16,40", ab_seeds = "1,2,3";
    TrainSetupFlags ab_flags;
    ablate->add_option("--data", ab_data, "dataset directory")->required();
    ablate->add_option("--out", ab_out, "output directory")->required();
    ablate->add_option("--labels", ab_labels, "comma list of N_t values")->capture_default_str();
    ablate->add_option("--seeds", ab_seeds, "comma list of run seeds")->capture_default_str();
    add_train_flags(ablate, ab_flags, false);
    ablate->callback([&]() {
        exit_code = cmd_ablate(ab_data, ab_out, ab_labels, ab_seeds, ab_flags, ablate);
    });

    try {
        app.parse(argc, argv);
        return exit_code;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

} // namespace ssdda
