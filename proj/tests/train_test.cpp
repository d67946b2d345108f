#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ssdda/data.hpp"
#include "ssdda/train.hpp"

using namespace ssdda;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    fs::path root;
    DatasetManifest manifest;
    LoadedDataset dataset;
    SplitSpec split;
    NetworkConfig nc;
    TrainConfig tc;

    explicit Fixture(const std::string& name, int image_size = 16) {
        root = fs::temp_directory_path() / name;
        fs::remove_all(root);
        SceneSpec spec;
        spec.height = spec.width = image_size;
        manifest = generate_dataset(spec, DomainShift{}, {6, 12}, root, 19);
        dataset = load_dataset(manifest);
        split = make_splits(manifest, 4, 0.25, 3);
        nc.hidden_channels = {4};
        nc.num_classes = dataset.num_classes;
        tc.iterations = 4;
        tc.seed = 11;
    }
};

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("string conversions for modes accept both separators") {
    CHECK(train_mode_from_string("dual") == TrainMode::dual);
    CHECK(train_mode_from_string("cross-only") == TrainMode::cross_only);
    CHECK(train_mode_from_string("cross_only") == TrainMode::cross_only);
    CHECK(train_mode_from_string("intra-only") == TrainMode::intra_only);
    CHECK_THROWS_AS(train_mode_from_string("both"), InvalidConfig);
    CHECK(to_string(TrainMode::intra_only) == "intra_only");
    CHECK(cross_mix_mode_from_string("pixel") == CrossMixMode::pixel);
    CHECK_THROWS_AS(cross_mix_mode_from_string("x"), InvalidConfig);
}

TEST_CASE("TrainConfig::validate rejects out-of-range hyperparameters") {
    TrainConfig tc;
    CHECK_NOTHROW(tc.validate());
    tc.lambda = -0.5;
    CHECK_THROWS_AS(tc.validate(), InvalidConfig);
    tc.lambda = 1.0;
    tc.ema_alpha = 1.5;
    CHECK_THROWS_AS(tc.validate(), InvalidConfig);
    tc.ema_alpha = 0.99;
    tc.iterations = 0;
    CHECK_THROWS_AS(tc.validate(), InvalidConfig);
    tc.iterations = 10;
    tc.lr0 = 0.0;
    CHECK_THROWS_AS(tc.validate(), InvalidConfig);
}

TEST_CASE("poly learning-rate schedule endpoints and monotone decay") {
    TrainConfig tc;
    tc.iterations = 1000;
    tc.lr0 = 2.5e-4;
    tc.poly_power = 0.9;
    CHECK(lr_schedule(tc, 0) == 2.5e-4);
    CHECK(lr_schedule(tc, 1000) == 0.0);
    CHECK(lr_schedule(tc, 500) == doctest::Approx(2.5e-4 * std::pow(0.5, 0.9)));
    double prev = lr_schedule(tc, 0);
    for (int i = 1; i <= 1000; i += 97) {
        const double cur = lr_schedule(tc, i);
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK_THROWS_AS(lr_schedule(tc, -1), InvalidInput);
    CHECK_THROWS_AS(lr_schedule(tc, 1001), InvalidInput);
}

TEST_CASE("sgd_update implements momentum + coupled weight decay, by hand") {
    ParamSet p;
    p.add("w", {2}, {1.0, -2.0});
    ParamSet v = zeros_like(p);
    ParamSet g = zeros_like(p);
    g.at("w").values = {0.5, 0.0};

    const double lr = 0.1, mu = 0.9, wd = 0.01;
    sgd_update(p, v, g, lr, mu, wd);
    // v1 = g + wd*p0; p1 = p0 - lr*v1
    const double v1_0 = 0.5 + 0.01 * 1.0;
    const double v1_1 = 0.0 + 0.01 * -2.0;
    CHECK(p.at("w").values[0] == doctest::Approx(1.0 - lr * v1_0));
    CHECK(p.at("w").values[1] == doctest::Approx(-2.0 - lr * v1_1));
    CHECK(v.at("w").values[0] == doctest::Approx(v1_0));

    // second step keeps the velocity memory
    const double p1_0 = 1.0 - lr * v1_0;
    sgd_update(p, v, g, lr, mu, wd);
    const double v2_0 = mu * v1_0 + (0.5 + wd * p1_0);
    CHECK(v.at("w").values[0] == doctest::Approx(v2_0));
    CHECK(p.at("w").values[0] == doctest::Approx(p1_0 - lr * v2_0));
}

TEST_CASE("weight decay alone shrinks parameters toward zero") {
    ParamSet p;
    p.add("w", {1}, {4.0});
    ParamSet v = zeros_like(p);
    const ParamSet g = zeros_like(p); // no data gradient at all

    // without momentum the decay is monotone: p <- p * (1 - lr*wd)
    double prev = 4.0;
    for (int i = 0; i < 50; ++i) {
        sgd_update(p, v, g, 0.1, 0.0, 0.05);
        CHECK(std::abs(p.at("w").values[0]) < std::abs(prev));
        CHECK(p.at("w").values[0] == doctest::Approx(prev * (1.0 - 0.1 * 0.05)));
        prev = p.at("w").values[0];
    }

    // with momentum the path oscillates, but decay still moves the value:
    // a zero gradient must not freeze the parameters
    ParamSet p2;
    p2.add("w", {1}, {4.0});
    ParamSet v2 = zeros_like(p2);
    sgd_update(p2, v2, g, 0.1, 0.9, 0.05);
    CHECK(p2.at("w").values[0] != 4.0);
    CHECK(p2.at("w").values[0] < 4.0);
}

TEST_CASE("init_train_state: teacher starts as an exact student copy") {
    TrainConfig tc;
    NetworkConfig nc;
    nc.num_classes = 5;
    nc.hidden_channels = {4};
    const TrainState s = init_train_state(tc, nc);
    CHECK(s.iteration == 0);
    CHECK(s.seed == tc.seed);
    CHECK(bit_equal(s.student.params, s.teacher.params));
    CHECK(s.teacher.role == NetRole::teacher);
    for (const auto& e : s.velocity.entries)
        for (const double v : e.values)
            CHECK(v == 0.0);

    TrainConfig other = tc;
    other.seed = tc.seed + 1;
    const TrainState s2 = init_train_state(other, nc);
    CHECK(!bit_equal(s.student.params, s2.student.params));
}

TEST_CASE("train_step runs one full iteration and moves both networks") {
    Fixture f("ssdda_train_step");
    TrainState state = init_train_state(f.tc, f.nc);
    const ParamSet student0 = state.student.params;
    const ParamSet teacher0 = state.teacher.params;

    Rng rng(1);
    const Batch batch = sample_batch(f.dataset, f.split, rng);
    const LossReport report = train_step(state, batch, f.tc);

    CHECK(state.iteration == 1);
    CHECK(report.l_s > 0.0);
    CHECK(report.l_t > 0.0);
    CHECK(report.l_u >= 0.0);
    CHECK(report.lambda == 1.0);
    CHECK(report.total == doctest::Approx(report.l_s + report.l_t + report.l_u));
    CHECK(report.valid_s > 0);
    CHECK(report.valid_u > 0);
    CHECK(!bit_equal(state.student.params, student0));
    CHECK(!bit_equal(state.teacher.params, teacher0));

    // teacher moved by EMA of the fresh student: t1 = a*t0 + (1-a)*s1
    const ParamSet expected =
        ema_update(teacher0, state.student.params, f.tc.ema_alpha);
    CHECK(bit_equal(expected, state.teacher.params));
}

TEST_CASE("mode algebra is exact: each mode equals its forced-flag expansion") {
    Fixture f("ssdda_train_modes");

    const auto run_steps = [&](const TrainConfig& cfg, int flags /* -1: use mode */) {
        TrainState state = init_train_state(cfg, f.nc);
        for (std::int64_t i = 0; i < 3; ++i) {
            Rng data_rng(mix_seed(0xba7c4ULL, static_cast<std::uint64_t>(i)));
            const Batch batch = sample_batch(f.dataset, f.split, data_rng);
            if (flags < 0)
                train_step(state, batch, cfg);
            else
                train_step_forced(state, batch, cfg, (flags & 2) != 0, (flags & 1) != 0);
        }
        return state;
    };

    TrainConfig dual = f.tc;
    dual.mode = TrainMode::dual;

    SUBCASE("cross_only == source branch only") {
        TrainConfig cross = dual;
        cross.mode = TrainMode::cross_only;
        const TrainState a = run_steps(cross, -1);
        const TrainState b = run_steps(dual, 2);
        CHECK(bit_equal(a.student.params, b.student.params));
        CHECK(bit_equal(a.teacher.params, b.teacher.params));
    }
    SUBCASE("intra_only == consistency branch only") {
        TrainConfig intra = dual;
        intra.mode = TrainMode::intra_only;
        const TrainState a = run_steps(intra, -1);
        const TrainState b = run_steps(dual, 1);
        CHECK(bit_equal(a.student.params, b.student.params));
    }
    SUBCASE("dual == both branches") {
        const TrainState a = run_steps(dual, -1);
        const TrainState b = run_steps(dual, 3);
        CHECK(bit_equal(a.student.params, b.student.params));
    }
    SUBCASE("lambda == 0 reduces dual to cross_only bitwise") {
        TrainConfig flat = dual;
        flat.lambda = 0.0;
        TrainConfig cross = flat;
        cross.mode = TrainMode::cross_only;
        const TrainState a = run_steps(flat, -1);
        const TrainState b = run_steps(cross, -1);
        CHECK(bit_equal(a.student.params, b.student.params));
    }
}

TEST_CASE("per-mode loss reports expose only the active terms") {
    Fixture f("ssdda_train_reports");
    Rng rng(2);
    const Batch batch = sample_batch(f.dataset, f.split, rng);

    TrainConfig cross = f.tc;
    cross.mode = TrainMode::cross_only;
    TrainState cs = init_train_state(cross, f.nc);
    const LossReport cr = train_step(cs, batch, cross);
    CHECK(cr.l_s > 0.0);
    CHECK(cr.l_t > 0.0);
    CHECK(cr.l_u == 0.0);
    CHECK(cr.valid_u == 0);
    CHECK(cr.total == doctest::Approx(cr.l_s + cr.l_t));

    // intra-domain training never sees the source domain, but the labeled
    // target images stay supervised
    TrainConfig intra = f.tc;
    intra.mode = TrainMode::intra_only;
    TrainState is = init_train_state(intra, f.nc);
    const LossReport ir = train_step(is, batch, intra);
    CHECK(ir.l_s == 0.0);
    CHECK(ir.valid_s == 0);
    CHECK(ir.l_t > 0.0);
    CHECK(ir.valid_t > 0);
    CHECK(ir.l_u > 0.0);
    CHECK(ir.total == doctest::Approx(ir.l_t + ir.l_u));
}

TEST_CASE("training checkpoints round-trip the full state at f32 precision") {
    Fixture f("ssdda_train_ckpt");
    TrainState state = init_train_state(f.tc, f.nc);
    Rng rng(3);
    const Batch batch = sample_batch(f.dataset, f.split, rng);
    train_step(state, batch, f.tc);

    const fs::path path = f.root / "ckpt.bin";
    save_train_checkpoint(path, state);
    const TrainState back = load_train_checkpoint(path);
    CHECK(back.iteration == state.iteration);
    CHECK(back.seed == state.seed);
    CHECK(back.student.config.num_classes == f.nc.num_classes);
    CHECK(back.student.config.hidden_channels == f.nc.hidden_channels);
    // values are binary32 on disk: a second round-trip is exact
    const fs::path path2 = f.root / "ckpt2.bin";
    save_train_checkpoint(path2, back);
    const TrainState back2 = load_train_checkpoint(path2);
    CHECK(bit_equal(back.student.params, back2.student.params));
    CHECK(bit_equal(back.velocity, back2.velocity));
    for (std::size_t e = 0; e < back.student.params.entries.size(); ++e)
        for (std::size_t i = 0; i < back.student.params.entries[e].values.size(); ++i)
            CHECK(back.student.params.entries[e].values[i] ==
                  doctest::Approx(state.student.params.entries[e].values[i]).epsilon(1e-6));
}

TEST_CASE("run_training writes metrics + checkpoint and is repeatable") {
    Fixture f("ssdda_train_run");
    f.tc.iterations = 6;
    const TrainResult r1 = run_training(f.tc, f.nc, f.dataset, f.split, f.root / "run1");
    CHECK(fs::exists(r1.checkpoint_path));
    CHECK(fs::exists(r1.metrics_path));
    REQUIRE(r1.metrics.size() == 7); // pre-training row + 6 steps
    CHECK(r1.metrics.front().iter == 0);
    CHECK(r1.metrics.front().has_miou);
    CHECK(!r1.metrics.front().has_losses);
    CHECK(r1.metrics.back().iter == 6);
    CHECK(r1.metrics.back().has_miou); // final step always evaluates
    CHECK(r1.final_val_miou == r1.metrics.back().val_miou);
    CHECK(r1.initial_val_miou == r1.metrics.front().val_miou);

    const TrainResult r2 = run_training(f.tc, f.nc, f.dataset, f.split, f.root / "run2");
    CHECK(slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path));
    CHECK(slurp(r1.metrics_path) == slurp(r2.metrics_path));
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run bitwise") {
    Fixture f("ssdda_train_resume");
    // An interrupted run is emulated by a shorter first invocation. Its lr
    // schedule must match the full run's, so flatten the poly decay — with
    // poly_power = 0 the schedule no longer depends on the total horizon
    // and the first 500 steps of both runs are identical by construction.
    f.tc.iterations = 503; // crosses the 500-step rolling checkpoint
    f.tc.poly_power = 0.0;

    const TrainResult full = run_training(f.tc, f.nc, f.dataset, f.split, f.root / "full");

    // interrupted run: first 500 steps...
    TrainConfig half = f.tc;
    half.iterations = 500;
    const TrainResult part = run_training(half, f.nc, f.dataset, f.split, f.root / "resumed");
    // ...then resume to the full horizon in the same directory
    const TrainResult rest = run_training(f.tc, f.nc, f.dataset, f.split, f.root / "resumed",
                                          part.checkpoint_path);

    CHECK(slurp(full.checkpoint_path) == slurp(rest.checkpoint_path));
    CHECK(slurp(full.metrics_path) == slurp(rest.metrics_path));
    CHECK(full.final_val_miou == rest.final_val_miou);

    // resume guards
    CHECK_THROWS_AS(run_training(half, f.nc, f.dataset, f.split, f.root / "resumed",
                                 full.checkpoint_path),
                    InvalidConfig); // checkpoint beyond the horizon
    TrainConfig other_seed = f.tc;
    other_seed.seed = f.tc.seed + 5;
    CHECK_THROWS_AS(run_training(other_seed, f.nc, f.dataset, f.split, f.root / "resumed2",
                                 full.checkpoint_path),
                    InvalidConfig);
}

TEST_CASE("config snapshots round-trip through the kv overlay") {
    TrainConfig tc;
    tc.iterations = 123;
    tc.lr0 = 3e-4;
    tc.lambda = 0.5;
    tc.mode = TrainMode::intra_only;
    tc.cross_mix_mode = CrossMixMode::pixel;
    tc.mix.variant = MixVariant::complexmix;
    tc.mix.block_count = 4;
    tc.seed = 77;
    NetworkConfig nc;
    nc.hidden_channels = {3, 5};
    nc.kernel_size = 5;

    const KvConfig kv = to_kv(tc, nc);
    TrainConfig tc2;
    NetworkConfig nc2;
    apply_kv(kv, tc2, nc2);
    CHECK(tc2.iterations == 123);
    CHECK(tc2.lr0 == 3e-4);
    CHECK(tc2.lambda == 0.5);
    CHECK(tc2.mode == TrainMode::intra_only);
    CHECK(tc2.cross_mix_mode == CrossMixMode::pixel);
    CHECK(tc2.mix.variant == MixVariant::complexmix);
    CHECK(tc2.mix.block_count == 4);
    CHECK(tc2.seed == 77);
    CHECK(nc2.hidden_channels == std::vector<int>{3, 5});
    CHECK(nc2.kernel_size == 5);

    // overlay semantics: unrelated keys leave values untouched
    TrainConfig tc3;
    NetworkConfig nc3;
    apply_kv(KvConfig::parse("lambda = 0.25\n"), tc3, nc3);
    CHECK(tc3.lambda == 0.25);
    CHECK(tc3.iterations == TrainConfig{}.iterations);
    CHECK_THROWS_AS(apply_kv(KvConfig::parse("network.hidden = 4,x\n"), tc3, nc3),
                    InvalidConfig);
}

TEST_CASE("ablation harness fills every cell and formats a table") {
    Fixture f("ssdda_train_ablate");
    TrainConfig base = f.tc;
    base.iterations = 2;
    const AblationTable table = run_ablation(base, f.nc, f.manifest, f.dataset, {3, 4}, {1, 2},
                                             f.root / "ablation");
    REQUIRE(table.cells.size() == 6); // 3 modes x 2 budgets
    for (const auto& cell : table.cells) {
        CHECK(cell.per_seed_miou.size() == 2);
        for (const double v : cell.per_seed_miou) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    const std::string text = format_ablation_table(table);
    CHECK(text.find("dual") != std::string::npos);
    CHECK(text.find("cross_only") != std::string::npos);
    CHECK(text.find("N_t=3") != std::string::npos);
}
