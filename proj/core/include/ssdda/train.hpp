#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssdda/data.hpp"
#include "ssdda/kvconfig.hpp"
#include "ssdda/losses.hpp"
#include "ssdda/metrics.hpp"
#include "ssdda/mixing.hpp"
#include "ssdda/model.hpp"

namespace ssdda {

enum class TrainMode { dual, cross_only, intra_only };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s); // accepts - or _ separators

/// How the cross-domain branch combines source and labeled target: joint
/// mini-batch supervision (batch, the default) or the experimental variant
/// (pixel) that replaces the plain source term with a mask-mixed
/// source/labeled-target sample, the mask built from the source ground
/// truth.
enum class CrossMixMode { batch, pixel };

std::string to_string(CrossMixMode m);
CrossMixMode cross_mix_mode_from_string(const std::string& s);

struct TrainConfig {
    std::int64_t iterations = 3000;
    double lr0 = 2.5e-4;
    double weight_decay = 5e-4;
    double momentum = 0.9;
    double poly_power = 0.9;
    double lambda = 1.0;
    double ema_alpha = 0.99;
    MixConfig mix;
    TrainMode mode = TrainMode::dual;
    CrossMixMode cross_mix_mode = CrossMixMode::batch;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Everything that evolves across iterations. The rng state is implicit:
/// batch sampling and mask draws run on per-iteration substreams derived
/// from (seed, iteration), which is what makes checkpoint resume exact.
struct TrainState {
    std::int64_t iteration = 0;
    std::uint64_t seed = 0;
    SegNetwork student;
    SegNetwork teacher;
    ParamSet velocity;
};

/// Fresh student (+ identical teacher copy, zero velocity) for the config.
TrainState init_train_state(const TrainConfig& cfg, const NetworkConfig& net_cfg);

/// Polynomial decay: lr0 * (1 - iter/iterations)^poly_power.
double lr_schedule(const TrainConfig& cfg, std::int64_t iter);

/// v <- momentum * v + (grad + weight_decay * param); param <- param - lr * v.
void sgd_update(ParamSet& params, ParamSet& velocity, const ParamSet& grads, double lr,
                double momentum, double weight_decay);

/// One full SSDDA iteration: supervised source + labeled-target terms,
/// mixing consistency term, combined SGD update, EMA teacher refresh.
LossReport train_step(TrainState& state, const Batch& batch, const TrainConfig& cfg);

/// train_step with the two optional branches forced on/off explicitly;
/// train_step maps its mode onto these flags (cross_only = no intra branch,
/// intra_only = no source branch, and lambda == 0 also disables the intra
/// branch since its update contribution would be identically zero). Exposed
/// so the mode-equivalence contract is checkable bit-for-bit.
LossReport train_step_forced(TrainState& state, const Batch& batch, const TrainConfig& cfg,
                             bool with_source, bool with_intra);

inline constexpr std::int64_t kEvalEvery = 250;
inline constexpr std::int64_t kCheckpointEvery = 500;

/// Full train-state container serialized through the checkpoint format:
/// state.iteration plus student.* / teacher.* / velocity.* entries.
void save_train_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_train_checkpoint(const std::filesystem::path& path);

struct TrainResult {
    double initial_val_miou = 0.0;
    double final_val_miou = 0.0;
    std::vector<MetricsRow> metrics;
    std::filesystem::path checkpoint_path;
    std::filesystem::path metrics_path;
};

/// Runs cfg.iterations steps: rolling checkpoint every kCheckpointEvery
/// iterations and at the end, validation mIoU every kEvalEvery iterations,
/// one metrics row per step plus a pre-training eval row. Passing a
/// checkpoint written by a previous invocation of the same run resumes it;
/// the resumed trajectory is bitwise identical to an uninterrupted one.
TrainResult run_training(const TrainConfig& cfg, const NetworkConfig& net_cfg,
                         const LoadedDataset& dataset, const SplitSpec& split,
                         const std::filesystem::path& out_dir,
                         const std::filesystem::path& resume_from = {});

struct AblationCell {
    TrainMode mode = TrainMode::dual;
    int n_labeled = 0;
    std::vector<double> per_seed_miou;
    double mean = 0.0;
    double stddev = 0.0;
};

struct AblationTable {
    std::vector<int> split_sizes;
    std::vector<std::uint64_t> seeds;
    std::vector<AblationCell> cells; // modes x split_sizes
};

/// Full runs for each (N_t, mode, seed); the base config supplies everything
/// except mode and seed. Splits are regenerated per (N_t, seed) so all three
/// modes of a cell compare on identical data.
AblationTable run_ablation(const TrainConfig& base, const NetworkConfig& net_cfg,
                           const DatasetManifest& manifest, const LoadedDataset& dataset,
                           const std::vector<int>& split_sizes,
                           const std::vector<std::uint64_t>& seeds,
                           const std::filesystem::path& out_dir);

/// Rows = modes, columns = labeled-target budgets, cells = mean +/- std
/// of final validation mIoU (in points, i.e. x100).
std::string format_ablation_table(const AblationTable& table);

/// Key/value snapshot of a training setup and the reverse overlay (missing
/// keys keep their current values, so flags can override a file).
KvConfig to_kv(const TrainConfig& cfg, const NetworkConfig& net_cfg);
void apply_kv(const KvConfig& kv, TrainConfig& cfg, NetworkConfig& net_cfg);

} // namespace ssdda
