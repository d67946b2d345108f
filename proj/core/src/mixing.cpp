#include "ssdda/mixing.hpp"

#include <algorithm>
#include <array>

namespace ssdda {

std::string to_string(MixVariant v) {
    return v == MixVariant::classmix ? "classmix" : "complexmix";
}

MixVariant mix_variant_from_string(const std::string& s) {
    if (s == "classmix")
        return MixVariant::classmix;
    if (s == "complexmix")
        return MixVariant::complexmix;
    throw InvalidConfig("unknown mix variant: " + s);
}

void MixConfig::validate() const {
    if (block_count < 1)
        throw InvalidConfig("mix block count must be >= 1");
}

namespace {

// Distinct classes in a window of `pred`, ascending, rejecting ignore values.
std::vector<std::uint8_t> classes_in_window(const LabelMap& pred, int y0, int y1, int x0, int x1) {
    std::array<bool, 256> seen{};
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            seen[pred.at(y, x)] = true;
    if (seen[kIgnoreLabel])
        throw InvalidInput("mask construction requires an ignore-free prediction");
    std::vector<std::uint8_t> out;
    for (int c = 0; c < 255; ++c)
        if (seen[c])
            out.push_back(static_cast<std::uint8_t>(c));
    return out;
}

// Uniform sample of ceil(k/2) classes without replacement (partial
// Fisher-Yates over the ascending class list, fixed draw order).
std::vector<std::uint8_t> select_half(std::vector<std::uint8_t> classes, Rng& rng) {
    const std::size_t k = classes.size();
    const std::size_t pick = (k + 1) / 2;
    for (std::size_t i = 0; i < pick; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(k - i));
        std::swap(classes[i], classes[j]);
    }
    classes.resize(pick);
    return classes;
}

void mark_selected(const LabelMap& pred, const std::vector<std::uint8_t>& selected, int y0, int y1,
                   int x0, int x1, MixMask& mask) {
    std::array<bool, 256> chosen{};
    for (std::uint8_t c : selected)
        chosen[c] = true;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            mask.at(y, x) = chosen[pred.at(y, x)] ? 1 : 0;
}

} // namespace

MixMask classmix_mask(const LabelMap& pred, Rng& rng) {
    if (pred.height <= 0 || pred.width <= 0 || pred.data.empty())
        throw InvalidInput("classmix_mask: empty prediction");
    MixMask mask(pred.height, pred.width);
    const auto classes = classes_in_window(pred, 0, pred.height, 0, pred.width);
    const auto selected = select_half(classes, rng);
    mark_selected(pred, selected, 0, pred.height, 0, pred.width, mask);
    return mask;
}

MixMask complexmix_mask(const LabelMap& pred, const MixConfig& cfg, Rng& rng) {
    if (pred.height <= 0 || pred.width <= 0 || pred.data.empty())
        throw InvalidInput("complexmix_mask: empty prediction");
    cfg.validate();
    const int p = cfg.block_count;
    if (p > std::min(pred.height, pred.width))
        throw InvalidConfig("block count " + std::to_string(p) + " exceeds min image side " +
                            std::to_string(std::min(pred.height, pred.width)));
    MixMask mask(pred.height, pred.width);
    for (int br = 0; br < p; ++br) {
        const int y0 = br * pred.height / p;
        const int y1 = (br + 1) * pred.height / p;
        for (int bc = 0; bc < p; ++bc) {
            const int x0 = bc * pred.width / p;
            const int x1 = (bc + 1) * pred.width / p;
            const auto classes = classes_in_window(pred, y0, y1, x0, x1);
            const auto selected = select_half(classes, rng);
            mark_selected(pred, selected, y0, y1, x0, x1, mask);
        }
    }
    return mask;
}

MixMask make_mask(const LabelMap& pred, const MixConfig& cfg, Rng& rng) {
    cfg.validate();
    return cfg.variant == MixVariant::classmix ? classmix_mask(pred, rng)
                                               : complexmix_mask(pred, cfg, rng);
}

SegImage mix_images(const SegImage& a, const SegImage& b, const MixMask& m) {
    if (!a.same_shape(b) || a.height != m.height || a.width != m.width)
        throw InvalidInput("mix_images: shape mismatch");
    SegImage out(a.height, a.width, a.channels);
    const std::size_t pixels = static_cast<std::size_t>(a.height) * a.width;
    for (std::size_t i = 0; i < pixels; ++i) {
        const double* src = m.data[i] ? &a.data[i * a.channels] : &b.data[i * a.channels];
        std::copy(src, src + a.channels, &out.data[i * a.channels]);
    }
    return out;
}

LabelMap mix_labels(const LabelMap& a, const LabelMap& b, const MixMask& m) {
    if (!a.same_shape(b) || a.height != m.height || a.width != m.width)
        throw InvalidInput("mix_labels: shape mismatch");
    LabelMap out(a.height, a.width);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        out.data[i] = m.data[i] ? a.data[i] : b.data[i];
    return out;
}

} // namespace ssdda
