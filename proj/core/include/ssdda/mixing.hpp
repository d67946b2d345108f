#pragma once

#include <cstdint>
#include <string>

#include "ssdda/rng.hpp"
#include "ssdda/types.hpp"

namespace ssdda {

enum class MixVariant { classmix, complexmix };

std::string to_string(MixVariant v);
MixVariant mix_variant_from_string(const std::string& s);

/// Configuration for category-level mask construction.
struct MixConfig {
    MixVariant variant = MixVariant::classmix;
    int block_count = 2; // p: the image is split into p x p blocks (complexmix only)
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// Builds a whole-image category mask from an argmaxed prediction: of the
/// distinct classes present, ceil(k/2) are drawn uniformly without
/// replacement and the mask is 1 exactly on their pixels.
/// The prediction must be free of ignore values; empty images are rejected.
MixMask classmix_mask(const LabelMap& pred, Rng& rng);

/// Block-wise variant: the image is tiled into p x p near-equal blocks
/// (block r spans rows [floor(r*H/p), floor((r+1)*H/p)), columns analogous)
/// and the class-selection rule runs independently per block, consuming the
/// rng in row-major block order. p = 1 degenerates to classmix_mask.
MixMask complexmix_mask(const LabelMap& pred, const MixConfig& cfg, Rng& rng);

/// Dispatches to classmix_mask or complexmix_mask per cfg.variant.
MixMask make_mask(const LabelMap& pred, const MixConfig& cfg, Rng& rng);

/// out[i,j] = a[i,j] where mask is 1, b[i,j] otherwise.
SegImage mix_images(const SegImage& a, const SegImage& b, const MixMask& m);

/// Element-wise label selection by the same rule; ignore values propagate
/// from whichever side is selected.
LabelMap mix_labels(const LabelMap& a, const LabelMap& b, const MixMask& m);

} // namespace ssdda
