#include "ssdda/losses.hpp"

#include <cmath>
#include <string>

#include "ssdda/errors.hpp"

namespace ssdda {

std::pair<double, PixelField> ce_loss(const ProbMap& pred, const LabelMap& target) {
    if (pred.height != target.height || pred.width != target.width)
        throw InvalidInput("ce_loss: prediction and target shapes disagree");
    const int C = pred.num_classes;
    const std::size_t pixels = static_cast<std::size_t>(pred.height) * pred.width;

    std::size_t valid = 0;
    for (std::size_t i = 0; i < pixels; ++i) {
        const std::uint8_t id = target.data[i];
        if (id == kIgnoreLabel)
            continue;
        if (id >= C)
            throw InvalidInput("ce_loss: target class " + std::to_string(id) +
                               " out of range for " + std::to_string(C) + " classes");
        ++valid;
    }
    if (valid == 0)
        throw DegenerateTarget("ce_loss: target has no valid pixels");

    const double inv_v = 1.0 / static_cast<double>(valid);
    PixelField grad(pred.height, pred.width, C); // zero-initialized
    double loss = 0.0;
    for (std::size_t i = 0; i < pixels; ++i) {
        const std::uint8_t id = target.data[i];
        if (id == kIgnoreLabel)
            continue;
        const double* p = pred.data.data() + i * C;
        loss -= std::log(std::max(p[id], 1e-12));
        double* g = grad.data.data() + i * C;
        for (int c = 0; c < C; ++c)
            g[c] = p[c] * inv_v;
        g[id] -= inv_v;
    }
    return {loss * inv_v, std::move(grad)};
}

double combined_loss(double l_s, double l_t, double l_u, double lambda) {
    if (!std::isfinite(l_s) || !std::isfinite(l_t) || !std::isfinite(l_u) ||
        !std::isfinite(lambda))
        throw NumericError("combined_loss: non-finite term");
    return l_s + l_t + lambda * l_u;
}

} // namespace ssdda
