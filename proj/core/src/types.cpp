#include "ssdda/types.hpp"

#include <cmath>
#include <string>

namespace ssdda {

namespace {

void require_positive_dims(int h, int w) {
    if (h <= 0 || w <= 0)
        throw InvalidInput("raster dimensions must be positive, got " + std::to_string(h) + "x" +
                           std::to_string(w));
}

} // namespace

SegImage::SegImage(int h, int w, int ch) : height(h), width(w), channels(ch) {
    require_positive_dims(h, w);
    if (ch <= 0)
        throw InvalidInput("channel count must be positive");
    data.assign(static_cast<std::size_t>(h) * w * ch, 0.0);
}

void SegImage::validate() const {
    require_positive_dims(height, width);
    if (data.size() != static_cast<std::size_t>(height) * width * channels)
        throw InvalidInput("SegImage data size does not match its dimensions");
    for (double v : data) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw InvalidInput("SegImage value outside [0, 1]: " + std::to_string(v));
    }
}

LabelMap::LabelMap(int h, int w, std::uint8_t fill) : height(h), width(w) {
    require_positive_dims(h, w);
    data.assign(static_cast<std::size_t>(h) * w, fill);
}

void LabelMap::validate(int num_classes) const {
    require_positive_dims(height, width);
    if (data.size() != static_cast<std::size_t>(height) * width)
        throw InvalidInput("LabelMap data size does not match its dimensions");
    for (std::uint8_t v : data) {
        if (v >= num_classes && v != kIgnoreLabel)
            throw InvalidInput("label id " + std::to_string(v) + " is neither < " +
                               std::to_string(num_classes) + " nor the ignore value");
    }
}

ProbMap::ProbMap(int h, int w, int c) : height(h), width(w), num_classes(c) {
    require_positive_dims(h, w);
    if (c <= 0)
        throw InvalidInput("class count must be positive");
    data.assign(static_cast<std::size_t>(h) * w * c, 0.0);
}

void ProbMap::validate(bool allow_masked_rows) const {
    require_positive_dims(height, width);
    if (data.size() != static_cast<std::size_t>(height) * width * num_classes)
        throw InvalidInput("ProbMap data size does not match its dimensions");
    const std::size_t pixels = static_cast<std::size_t>(height) * width;
    for (std::size_t p = 0; p < pixels; ++p) {
        double sum = 0.0;
        for (int c = 0; c < num_classes; ++c) {
            const double v = data[p * num_classes + c];
            if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                throw InvalidInput("probability outside [0, 1]: " + std::to_string(v));
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-5 && !(allow_masked_rows && sum == 0.0))
            throw InvalidInput("per-pixel probabilities sum to " + std::to_string(sum));
    }
}

MixMask::MixMask(int h, int w, std::uint8_t fill) : height(h), width(w) {
    require_positive_dims(h, w);
    data.assign(static_cast<std::size_t>(h) * w, fill);
}

void MixMask::validate() const {
    require_positive_dims(height, width);
    if (data.size() != static_cast<std::size_t>(height) * width)
        throw InvalidInput("MixMask data size does not match its dimensions");
    for (std::uint8_t v : data) {
        if (v != 0 && v != 1)
            throw InvalidInput("mask value must be 0 or 1, got " + std::to_string(v));
    }
}

PixelField::PixelField(int h, int w, int c) : height(h), width(w), channels(c) {
    require_positive_dims(h, w);
    data.assign(static_cast<std::size_t>(h) * w * c, 0.0);
}

LabelMap argmax_label(const ProbMap& p) {
    LabelMap out(p.height, p.width);
    const std::size_t pixels = static_cast<std::size_t>(p.height) * p.width;
    for (std::size_t i = 0; i < pixels; ++i) {
        const double* row = p.data.data() + i * p.num_classes;
        int best = 0;
        double best_v = row[0];
        for (int c = 1; c < p.num_classes; ++c) {
            if (row[c] > best_v) {
                best_v = row[c];
                best = c;
            }
        }
        out.data[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

std::int64_t count_valid(const LabelMap& l) {
    std::int64_t n = 0;
    for (const std::uint8_t v : l.data)
        if (v != kIgnoreLabel)
            ++n;
    return n;
}

ProbMap one_hot(const LabelMap& l, int num_classes) {
    ProbMap out(l.height, l.width, num_classes);
    const std::size_t pixels = static_cast<std::size_t>(l.height) * l.width;
    for (std::size_t i = 0; i < pixels; ++i) {
        const std::uint8_t v = l.data[i];
        if (v == kIgnoreLabel)
            continue; // all-zero row, masked out downstream
        if (v >= num_classes)
            throw InvalidInput("label id " + std::to_string(v) + " >= num_classes " +
                               std::to_string(num_classes));
        out.data[i * num_classes + v] = 1.0;
    }
    return out;
}

} // namespace ssdda
