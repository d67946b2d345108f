#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ssdda/rng.hpp"
#include "ssdda/types.hpp"

namespace ssdda {

enum class Domain { source, target };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

/// Procedural scene parameters. Class ids: 0 background, 1 circle,
/// 2 rectangle, 3 triangle, 4 stripe.
struct SceneSpec {
    int height = 64;
    int width = 64;
    int num_classes = 5;
    int min_shapes = 2;
    int max_shapes = 4;

    void validate() const;
};

/// Appearance perturbations applied to target-domain images only; label maps
/// are never touched. Every component is disabled by setting it to zero.
struct DomainShift {
    double hue_rotation_deg = 60.0;
    double noise_sigma = 0.05;
    double brightness_gradient = 0.2;
    double texture_frequency = 8.0; // cycles per image
};

/// Rasterizes one scene: shapes drawn back-to-front over a background, the
/// label map recording the topmost class per pixel. Geometry and colors are
/// drawn from rng before any domain shift, so the same incoming rng state
/// yields identical label maps for both domains. Every drawn shape is
/// guaranteed at least one visible pixel (occluded scenes are redrawn).
std::pair<SegImage, LabelMap> generate_scene(const SceneSpec& spec, Domain domain,
                                             const DomainShift& shift, Rng& rng);

struct DatasetCounts {
    int n_source = 500;
    int n_target = 200;
};

struct ManifestItem {
    std::string id;
    Domain domain = Domain::source;
    std::string image_path; // relative to root
    std::string label_path;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<ManifestItem> items;
    int num_classes = 5;

    int n_source() const;
    int n_target() const;
    std::vector<std::string> target_ids() const;

    /// Unique ids and, for on-disk manifests, existing files.
    void validate(bool check_files) const;
};

/// Generates the full two-domain benchmark under out_dir:
///   images/<id>.ppm, labels/<id>.pgm, manifest.txt
/// Byte-identical for a fixed (spec, shift, counts, seed): every image gets
/// its own rng substream derived from the seed.
DatasetManifest generate_dataset(const SceneSpec& spec, const DomainShift& shift,
                                 const DatasetCounts& counts,
                                 const std::filesystem::path& out_dir, std::uint64_t seed);

void save_manifest(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& root);

/// Disjoint partition of the target ids into labeled / unlabeled / val.
struct SplitSpec {
    std::vector<std::string> labeled;
    std::vector<std::string> unlabeled;
    std::vector<std::string> val;
    std::uint64_t seed = 0;
};

/// Uniform random assignment: round(val_fraction * N) validation ids first,
/// then n_labeled labeled ids, remainder unlabeled. Deterministic per seed.
SplitSpec make_splits(const DatasetManifest& manifest, int n_labeled, double val_fraction,
                      std::uint64_t seed);

/// Throws InvalidSplit unless the three sections are disjoint and together
/// cover exactly the manifest's target ids.
void check_split(const DatasetManifest& manifest, const SplitSpec& split);

void save_split(const std::filesystem::path& path, const SplitSpec& split);
SplitSpec load_split(const std::filesystem::path& path);

struct LoadedItem {
    std::string id;
    SegImage image;
    LabelMap label;
};

/// Whole benchmark resident in memory (the rasters are small); target items
/// are addressable by id for split resolution.
struct LoadedDataset {
    int num_classes = 0;
    std::vector<LoadedItem> source;
    std::vector<LoadedItem> target;
    std::unordered_map<std::string, std::size_t> target_index;

    const LoadedItem& target_item(const std::string& id) const;
};

LoadedDataset load_dataset(const DatasetManifest& manifest);

/// One training batch: 1 source pair, 2 labeled target pairs, 2 unlabeled
/// target images (the mixing pair). Pointers alias the LoadedDataset.
struct Batch {
    const SegImage* source_image = nullptr;
    const LabelMap* source_label = nullptr;
    std::array<const SegImage*, 2> target_images{};
    std::array<const LabelMap*, 2> target_labels{};
    std::array<const SegImage*, 2> unlabeled_images{};
};

/// Uniform sampling with replacement across iterations; the two unlabeled
/// draws are forced distinct (they form the mixing pair). Requires >= 2
/// labeled and >= 2 unlabeled target items.
Batch sample_batch(const LoadedDataset& dataset, const SplitSpec& split, Rng& rng);

} // namespace ssdda
