#pragma once

#include <cstdint>
#include <vector>

#include "ssdda/errors.hpp"

namespace ssdda {

/// Reserved label value excluded from every loss and metric.
inline constexpr std::uint8_t kIgnoreLabel = 255;

/// H x W x channels raster with real values in [0, 1], row-major.
struct SegImage {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<double> data; // (y * width + x) * channels + c

    SegImage() = default;
    SegImage(int h, int w, int ch);

    double& at(int y, int x, int c) { return data[static_cast<std::size_t>(y * width + x) * channels + c]; }
    double at(int y, int x, int c) const { return data[static_cast<std::size_t>(y * width + x) * channels + c]; }

    bool same_shape(const SegImage& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    /// Throws InvalidInput unless all values are finite and within [0, 1].
    void validate() const;
};

/// H x W integer class map; values are class ids or kIgnoreLabel.
struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data; // y * width + x

    LabelMap() = default;
    LabelMap(int h, int w, std::uint8_t fill = 0);

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

    bool same_shape(const LabelMap& o) const { return height == o.height && width == o.width; }

    /// Throws InvalidInput if any value is neither a class id below
    /// num_classes nor the ignore value.
    void validate(int num_classes) const;

    bool operator==(const LabelMap& o) const = default;
};

/// H x W x C per-pixel class probabilities, row-major.
///
/// Rows normally sum to 1; the one sanctioned exception is the all-zero row
/// produced by one_hot() for ignored pixels, which consumers must treat as
/// masked out.
struct ProbMap {
    int height = 0;
    int width = 0;
    int num_classes = 0;
    std::vector<double> data; // (y * width + x) * num_classes + c

    ProbMap() = default;
    ProbMap(int h, int w, int c);

    double& at(int y, int x, int c) { return data[static_cast<std::size_t>(y * width + x) * num_classes + c]; }
    double at(int y, int x, int c) const { return data[static_cast<std::size_t>(y * width + x) * num_classes + c]; }

    /// Throws InvalidInput unless every value is in [0, 1] and every pixel
    /// row sums to 1 within 1e-5 (or exactly 0 when allow_masked_rows).
    void validate(bool allow_masked_rows = false) const;
};

/// H x W binary mask; every value is exactly 0 or 1.
struct MixMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    MixMask() = default;
    MixMask(int h, int w, std::uint8_t fill = 0);

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

    void validate() const;

    bool operator==(const MixMask& o) const = default;
};

/// Unconstrained per-pixel C-vector field (same layout as ProbMap); carries
/// loss gradients with respect to pre-softmax logits.
struct PixelField {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    PixelField() = default;
    PixelField(int h, int w, int c);

    double& at(int y, int x, int c) { return data[static_cast<std::size_t>(y * width + x) * channels + c]; }
    double at(int y, int x, int c) const { return data[static_cast<std::size_t>(y * width + x) * channels + c]; }
};

/// Per-pixel argmax with ties broken to the lowest class index.
LabelMap argmax_label(const ProbMap& p);

/// Number of non-ignore pixels.
std::int64_t count_valid(const LabelMap& l);

/// One-hot encoding; ignored pixels become all-zero rows.
/// Throws InvalidInput when a label id is >= num_classes.
ProbMap one_hot(const LabelMap& l, int num_classes);

} // namespace ssdda
