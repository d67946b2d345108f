#include "ssdda/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ssdda/checkpoint.hpp"
#include "ssdda/errors.hpp"
#include "ssdda/eval.hpp"

namespace ssdda {

namespace {

// Seed-stream tags: independent substreams for network init, batch
// sampling, and mask generation, all derived from the one config seed.
constexpr std::uint64_t kTagInit = 0x1817;
constexpr std::uint64_t kTagData = 0xba7c4;
constexpr std::uint64_t kTagMask = 0x3a5c;

Rng iteration_rng(std::uint64_t seed, std::uint64_t tag, std::int64_t iter) {
    return Rng(mix_seed(mix_seed(seed, tag), static_cast<std::uint64_t>(iter)));
}

double sample_stddev(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2)
        return 0.0;
    double acc = 0.0;
    for (const double x : xs)
        acc += (x - mean) * (x - mean);
    return std::sqrt(acc / (static_cast<double>(xs.size()) - 1.0));
}

} // namespace

std::string to_string(TrainMode m) {
    switch (m) {
    case TrainMode::dual:
        return "dual";
    case TrainMode::cross_only:
        return "cross_only";
    default:
        return "intra_only";
    }
}

TrainMode train_mode_from_string(const std::string& s) {
    std::string t = s;
    std::replace(t.begin(), t.end(), '-', '_');
    if (t == "dual")
        return TrainMode::dual;
    if (t == "cross_only")
        return TrainMode::cross_only;
    if (t == "intra_only")
        return TrainMode::intra_only;
    throw InvalidConfig("unknown training mode: " + s);
}

std::string to_string(CrossMixMode m) {
    return m == CrossMixMode::batch ? "batch" : "pixel";
}

CrossMixMode cross_mix_mode_from_string(const std::string& s) {
    if (s == "batch")
        return CrossMixMode::batch;
    if (s == "pixel")
        return CrossMixMode::pixel;
    throw InvalidConfig("unknown cross_mix_mode: " + s);
}

void TrainConfig::validate() const {
    if (iterations <= 0)
        throw InvalidConfig("iterations must be positive");
    if (!(lr0 > 0.0))
        throw InvalidConfig("lr0 must be positive");
    if (weight_decay < 0.0 || momentum < 0.0 || momentum >= 1.0)
        throw InvalidConfig("need weight_decay >= 0 and momentum in [0, 1)");
    if (poly_power < 0.0)
        throw InvalidConfig("poly_power must be non-negative");
    if (!(ema_alpha >= 0.0 && ema_alpha <= 1.0))
        throw InvalidConfig("ema_alpha must lie in [0, 1]");
    if (!std::isfinite(lambda) || lambda < 0.0)
        throw InvalidConfig("lambda must be finite and non-negative");
    mix.validate();
}

TrainState init_train_state(const TrainConfig& cfg, const NetworkConfig& net_cfg) {
    cfg.validate();
    NetworkConfig nc = net_cfg;
    nc.seed = mix_seed(cfg.seed, kTagInit);
    TrainState state;
    state.seed = cfg.seed;
    state.student = init_network(nc);
    state.teacher = state.student; // teacher starts as an exact copy
    state.teacher.role = NetRole::teacher;
    state.velocity = zeros_like(state.student.params);
    return state;
}

double lr_schedule(const TrainConfig& cfg, std::int64_t iter) {
    if (iter < 0 || iter > cfg.iterations)
        throw InvalidInput("lr_schedule: iteration out of range");
    const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(cfg.iterations);
    return cfg.lr0 * std::pow(frac, cfg.poly_power);
}

void sgd_update(ParamSet& params, ParamSet& velocity, const ParamSet& grads, double lr,
                double momentum, double weight_decay) {
    if (!compatible(params, velocity) || !compatible(params, grads))
        throw InvalidInput("sgd_update: incompatible parameter/velocity/gradient sets");
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
        double* p = params.entries[i].values.data();
        double* v = velocity.entries[i].values.data();
        const double* g = grads.entries[i].values.data();
        const std::size_t n = params.entries[i].values.size();
        for (std::size_t k = 0; k < n; ++k) {
            v[k] = momentum * v[k] + (g[k] + weight_decay * p[k]);
            p[k] -= lr * v[k];
        }
    }
}

LossReport train_step(TrainState& state, const Batch& batch, const TrainConfig& cfg) {
    const bool with_source = cfg.mode != TrainMode::intra_only;
    const bool with_intra = cfg.mode != TrainMode::cross_only && cfg.lambda != 0.0;
    return train_step_forced(state, batch, cfg, with_source, with_intra);
}

LossReport train_step_forced(TrainState& state, const Batch& batch, const TrainConfig& cfg,
                             bool with_source, bool with_intra) {
    cfg.validate();
    if (!batch.source_image || !batch.source_label || !batch.target_images[0] ||
        !batch.target_labels[0] || !batch.target_images[1] || !batch.target_labels[1] ||
        !batch.unlabeled_images[0] || !batch.unlabeled_images[1])
        throw InvalidInput("train_step: incomplete batch");

    Rng mask_rng = iteration_rng(cfg.seed, kTagMask, state.iteration);
    LossReport report;
    report.lambda = cfg.lambda;
    ParamSet grads = zeros_like(state.student.params);

    if (with_source) {
        const SegImage* x_s = batch.source_image;
        const LabelMap* y_s = batch.source_label;
        SegImage mixed_image;
        LabelMap mixed_label;
        if (cfg.cross_mix_mode == CrossMixMode::pixel) {
            // Experimental cross-domain mixing: source pixels of half the
            // ground-truth classes pasted over a labeled target image.
            const MixMask m = make_mask(*y_s, cfg.mix, mask_rng);
            mixed_image = mix_images(*x_s, *batch.target_images[0], m);
            mixed_label = mix_labels(*y_s, *batch.target_labels[0], m);
            x_s = &mixed_image;
            y_s = &mixed_label;
        }
        auto [probs, trace] = forward(state.student, *x_s);
        auto [loss, grad] = ce_loss(probs, *y_s);
        report.l_s = loss;
        report.valid_s = count_valid(*y_s);
        add_scaled(grads, backward(state.student, trace, grad), 1.0);
    }

    for (int i = 0; i < 2; ++i) { // labeled-target terms, averaged
        auto [probs, trace] = forward(state.student, *batch.target_images[i]);
        auto [loss, grad] = ce_loss(probs, *batch.target_labels[i]);
        report.l_t += 0.5 * loss;
        report.valid_t += count_valid(*batch.target_labels[i]);
        add_scaled(grads, backward(state.student, trace, grad), 0.5);
    }

    if (with_intra) {
        // Teacher pseudo-labels; no traces, so no gradient can flow back.
        const LabelMap y_a = argmax_label(forward_probs(state.teacher, *batch.unlabeled_images[0]));
        const LabelMap y_b = argmax_label(forward_probs(state.teacher, *batch.unlabeled_images[1]));
        const MixMask m = make_mask(y_a, cfg.mix, mask_rng);
        const SegImage x_ab = mix_images(*batch.unlabeled_images[0], *batch.unlabeled_images[1], m);
        const LabelMap y_ab = mix_labels(y_a, y_b, m);
        auto [probs, trace] = forward(state.student, x_ab);
        auto [loss, grad] = ce_loss(probs, y_ab);
        report.l_u = loss;
        report.valid_u = count_valid(y_ab);
        add_scaled(grads, backward(state.student, trace, grad), cfg.lambda);
    }

    try {
        report.total = combined_loss(report.l_s, report.l_t, report.l_u, cfg.lambda);
    } catch (const NumericError&) {
        std::ostringstream dump;
        dump << "train_step: non-finite loss at iteration " << state.iteration
             << " (L_s=" << report.l_s << ", L_t=" << report.l_t << ", L_u=" << report.l_u
             << ", lambda=" << cfg.lambda << ")";
        throw NumericError(dump.str());
    }

    const double lr = lr_schedule(cfg, state.iteration);
    ParamSet params = state.student.params;
    sgd_update(params, state.velocity, grads, lr, cfg.momentum, cfg.weight_decay);
    state.student.set_params(std::move(params));
    state.teacher.set_params(
        ema_update(state.teacher.params, state.student.params, cfg.ema_alpha));
    state.iteration += 1;
    return report;
}

namespace {

// Round every value to checkpoint (binary32) precision. run_training applies
// this to the live state at each checkpoint write so the continued run and a
// run resumed from that file follow bitwise-identical trajectories.
void quantize_params(ParamSet& p) {
    for (auto& e : p.entries)
        for (auto& v : e.values)
            v = static_cast<double>(static_cast<float>(v));
}

} // namespace

void save_train_checkpoint(const std::filesystem::path& path, const TrainState& state) {
    ParamSet all;
    all.add("state.iteration", {1}, {static_cast<double>(state.iteration)});
    all.add("state.seed_lo", {1}, {static_cast<double>(state.seed & 0xffffffffULL)});
    all.add("state.seed_hi", {1}, {static_cast<double>(state.seed >> 32)});
    for (const auto& e : with_prefix(state.student.params, "student.").entries)
        all.add(e.name, e.shape, e.values);
    for (const auto& e : with_prefix(state.teacher.params, "teacher.").entries)
        all.add(e.name, e.shape, e.values);
    for (const auto& e : with_prefix(state.velocity, "velocity.").entries)
        all.add(e.name, e.shape, e.values);
    save_checkpoint(path, all);
}

TrainState load_train_checkpoint(const std::filesystem::path& path) {
    const ParamSet all = load_checkpoint(path);
    TrainState state;
    if (!all.has("state.iteration"))
        throw FormatError(path.string() + ": not a training checkpoint (no state.iteration)");
    state.iteration = static_cast<std::int64_t>(all.at("state.iteration").values.at(0));
    const auto lo = static_cast<std::uint64_t>(all.at("state.seed_lo").values.at(0));
    const auto hi = static_cast<std::uint64_t>(all.at("state.seed_hi").values.at(0));
    state.seed = (hi << 32) | lo;
    state.student = network_from_params(subset_with_prefix(all, "student."), NetRole::student);
    state.teacher = network_from_params(subset_with_prefix(all, "teacher."), NetRole::teacher);
    state.velocity = subset_with_prefix(all, "velocity.");
    if (!compatible(state.student.params, state.velocity))
        throw FormatError(path.string() + ": velocity does not match student parameters");
    return state;
}

TrainResult run_training(const TrainConfig& cfg, const NetworkConfig& net_cfg,
                         const LoadedDataset& dataset, const SplitSpec& split,
                         const std::filesystem::path& out_dir,
                         const std::filesystem::path& resume_from) {
    cfg.validate();
    if (split.labeled.size() < 2 || split.unlabeled.size() < 2)
        throw InvalidSplit("run_training: split needs >= 2 labeled and >= 2 unlabeled targets");
    std::filesystem::create_directories(out_dir);

    NetworkConfig nc = net_cfg;
    nc.num_classes = dataset.num_classes;

    TrainState state;
    const bool resuming = !resume_from.empty();
    if (resuming) {
        state = load_train_checkpoint(resume_from);
        if (state.seed != cfg.seed)
            throw InvalidConfig("resume checkpoint was written under a different seed");
        if (state.iteration > cfg.iterations)
            throw InvalidConfig("resume checkpoint is beyond the configured iteration count");
        if (state.student.config.num_classes != dataset.num_classes)
            throw InvalidConfig("resume checkpoint class count does not match the dataset");
    } else {
        state = init_train_state(cfg, nc);
    }

    TrainResult result;
    result.metrics_path = out_dir / "metrics.csv";
    result.checkpoint_path = out_dir / "checkpoint.bin";
    if (resuming && std::filesystem::exists(result.metrics_path)) {
        // Drop rows past the checkpointed iteration so an interrupted run
        // cannot leave duplicates behind after the replayed steps.
        auto rows = read_metrics(result.metrics_path);
        std::ofstream rewrite(result.metrics_path, std::ios::trunc);
        rewrite << kMetricsHeader << '\n';
        for (const auto& row : rows)
            if (row.iter <= state.iteration)
                rewrite << format_metrics_row(row) << '\n';
    }
    MetricsWriter metrics(result.metrics_path, /*append=*/resuming);

    const bool can_eval = !split.val.empty();
    const auto val_miou = [&]() {
        return mean_iou(evaluate_network(state.student, dataset, split.val),
                        all_classes(dataset.num_classes));
    };

    result.initial_val_miou = std::numeric_limits<double>::quiet_NaN();
    if (!resuming) {
        MetricsRow row; // pre-training eval row: no losses yet
        row.iter = 0;
        if (can_eval) {
            result.initial_val_miou = val_miou();
            row.has_miou = true;
            row.val_miou = result.initial_val_miou;
        }
        metrics.write(row);
    } else if (std::filesystem::exists(result.metrics_path)) {
        const auto rows = read_metrics(result.metrics_path);
        if (!rows.empty() && rows.front().iter == 0 && rows.front().has_miou)
            result.initial_val_miou = rows.front().val_miou;
    }

    result.final_val_miou = std::numeric_limits<double>::quiet_NaN();
    for (std::int64_t i = state.iteration; i < cfg.iterations; ++i) {
        Rng data_rng = iteration_rng(cfg.seed, kTagData, i);
        const Batch batch = sample_batch(dataset, split, data_rng);
        const double lr = lr_schedule(cfg, i);
        const LossReport report = train_step(state, batch, cfg);

        MetricsRow row;
        row.iter = state.iteration;
        row.has_losses = true;
        row.l_s = report.l_s;
        row.l_t = report.l_t;
        row.l_u = report.l_u;
        row.total = report.total;
        row.lr = lr;
        const bool last = state.iteration == cfg.iterations;
        if (can_eval && (state.iteration % kEvalEvery == 0 || last)) {
            row.has_miou = true;
            row.val_miou = val_miou();
            result.final_val_miou = row.val_miou;
        }
        metrics.write(row);
        if (state.iteration % kCheckpointEvery == 0 || last) {
            metrics.flush();
            save_train_checkpoint(result.checkpoint_path, state);
            ParamSet sp = state.student.params;
            quantize_params(sp);
            state.student.set_params(std::move(sp));
            ParamSet tp = state.teacher.params;
            quantize_params(tp);
            state.teacher.set_params(std::move(tp));
            quantize_params(state.velocity);
        }
    }
    metrics.flush();
    result.metrics = read_metrics(result.metrics_path);
    if (std::isnan(result.final_val_miou)) {
        // Resumed past the last step (or no val split): recover the newest
        // recorded value if one exists.
        for (auto it = result.metrics.rbegin(); it != result.metrics.rend(); ++it)
            if (it->has_miou) {
                result.final_val_miou = it->val_miou;
                break;
            }
    }
    return result;
}

AblationTable run_ablation(const TrainConfig& base, const NetworkConfig& net_cfg,
                           const DatasetManifest& manifest, const LoadedDataset& dataset,
                           const std::vector<int>& split_sizes,
                           const std::vector<std::uint64_t>& seeds,
                           const std::filesystem::path& out_dir) {
    if (seeds.empty() || split_sizes.empty())
        throw InvalidConfig("run_ablation: need at least one seed and one split size");
    constexpr TrainMode kModes[] = {TrainMode::cross_only, TrainMode::intra_only,
                                    TrainMode::dual};
    AblationTable table;
    table.split_sizes = split_sizes;
    table.seeds = seeds;
    for (const TrainMode mode : kModes) {
        for (const int n_labeled : split_sizes) {
            AblationCell cell;
            cell.mode = mode;
            cell.n_labeled = n_labeled;
            for (const std::uint64_t seed : seeds) {
                const SplitSpec split = make_splits(manifest, n_labeled, 0.25, seed);
                TrainConfig cfg = base;
                cfg.mode = mode;
                cfg.seed = seed;
                char name[64];
                std::snprintf(name, sizeof(name), "nt%03d_seed%llu_%s", n_labeled,
                              static_cast<unsigned long long>(seed), to_string(mode).c_str());
                const TrainResult res =
                    run_training(cfg, net_cfg, dataset, split, out_dir / name);
                cell.per_seed_miou.push_back(res.final_val_miou);
            }
            double sum = 0.0;
            for (const double v : cell.per_seed_miou)
                sum += v;
            cell.mean = sum / static_cast<double>(cell.per_seed_miou.size());
            cell.stddev = sample_stddev(cell.per_seed_miou, cell.mean);
            table.cells.push_back(std::move(cell));
        }
    }
    return table;
}

std::string format_ablation_table(const AblationTable& table) {
    std::ostringstream out;
    out << "final val mIoU (points, mean +/- std over " << table.seeds.size() << " seed"
        << (table.seeds.size() == 1 ? "" : "s") << ")\n";
    char buf[64];
    out << "mode        ";
    for (const int n : table.split_sizes) {
        std::snprintf(buf, sizeof(buf), "  N_t=%-10d", n);
        out << buf;
    }
    out << '\n';
    constexpr TrainMode kModes[] = {TrainMode::cross_only, TrainMode::intra_only,
                                    TrainMode::dual};
    for (const TrainMode mode : kModes) {
        std::snprintf(buf, sizeof(buf), "%-12s", to_string(mode).c_str());
        out << buf;
        for (const int n : table.split_sizes) {
            const auto it = std::find_if(table.cells.begin(), table.cells.end(),
                                         [&](const AblationCell& c) {
                                             return c.mode == mode && c.n_labeled == n;
                                         });
            if (it == table.cells.end()) {
                out << "  --            ";
                continue;
            }
            std::snprintf(buf, sizeof(buf), "  %5.1f +/- %-4.1f", it->mean * 100.0,
                          it->stddev * 100.0);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

KvConfig to_kv(const TrainConfig& cfg, const NetworkConfig& net_cfg) {
    KvConfig kv;
    kv.set_int("iterations", cfg.iterations);
    kv.set_double("lr0", cfg.lr0);
    kv.set_double("weight_decay", cfg.weight_decay);
    kv.set_double("momentum", cfg.momentum);
    kv.set_double("poly_power", cfg.poly_power);
    kv.set_double("lambda", cfg.lambda);
    kv.set_double("ema_alpha", cfg.ema_alpha);
    kv.set("mode", to_string(cfg.mode));
    kv.set("cross_mix_mode", to_string(cfg.cross_mix_mode));
    kv.set_int("seed", static_cast<std::int64_t>(cfg.seed));
    kv.set("mix.variant", to_string(cfg.mix.variant));
    kv.set_int("mix.block_count", cfg.mix.block_count);
    std::string hidden;
    for (const int h : net_cfg.hidden_channels)
        hidden += (hidden.empty() ? "" : ",") + std::to_string(h);
    kv.set("network.hidden", hidden);
    kv.set_int("network.kernel_size", net_cfg.kernel_size);
    return kv;
}

void apply_kv(const KvConfig& kv, TrainConfig& cfg, NetworkConfig& net_cfg) {
    cfg.iterations = kv.get_int("iterations", cfg.iterations);
    cfg.lr0 = kv.get_double("lr0", cfg.lr0);
    cfg.weight_decay = kv.get_double("weight_decay", cfg.weight_decay);
    cfg.momentum = kv.get_double("momentum", cfg.momentum);
    cfg.poly_power = kv.get_double("poly_power", cfg.poly_power);
    cfg.lambda = kv.get_double("lambda", cfg.lambda);
    cfg.ema_alpha = kv.get_double("ema_alpha", cfg.ema_alpha);
    if (kv.has("mode"))
        cfg.mode = train_mode_from_string(kv.get_string("mode"));
    if (kv.has("cross_mix_mode"))
        cfg.cross_mix_mode = cross_mix_mode_from_string(kv.get_string("cross_mix_mode"));
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(cfg.seed)));
    if (kv.has("mix.variant"))
        cfg.mix.variant = mix_variant_from_string(kv.get_string("mix.variant"));
    cfg.mix.block_count = static_cast<int>(kv.get_int("mix.block_count", cfg.mix.block_count));
    if (kv.has("network.hidden")) {
        const std::string spec = kv.get_string("network.hidden");
        std::vector<int> hidden;
        std::istringstream in(spec);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            try {
                hidden.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw InvalidConfig("network.hidden: not a channel count: " + tok);
            }
        }
        if (hidden.empty())
            throw InvalidConfig("network.hidden must list at least one channel count");
        net_cfg.hidden_channels = std::move(hidden);
    }
    net_cfg.kernel_size =
        static_cast<int>(kv.get_int("network.kernel_size", net_cfg.kernel_size));
}

} // namespace ssdda
