#pragma once

#include <cstdint>
#include <utility>

#include "ssdda/types.hpp"

namespace ssdda {

// One training step's loss terms. total is the scalarized objective
// L_s + L_t + lambda * L_u that the optimizer descends.
struct LossReport {
    double l_s = 0.0;
    double l_t = 0.0;
    double l_u = 0.0;
    double lambda = 1.0;
    double total = 0.0;
    std::int64_t valid_s = 0; // valid-pixel counts behind each term
    std::int64_t valid_t = 0;
    std::int64_t valid_u = 0;
};

// Mean cross-entropy over valid (non-ignore) pixels, together with the
// gradient w.r.t. the pre-softmax logits: (pred - onehot) / V on valid
// pixels, zero elsewhere. Probabilities are clamped to >= 1e-12 before
// the log. Throws DegenerateTarget when no pixel is valid.
std::pair<double, PixelField> ce_loss(const ProbMap& pred, const LabelMap& target);

// L_s + L_t + lambda * L_u. Throws NumericError on non-finite inputs.
double combined_loss(double l_s, double l_t, double l_u, double lambda);

} // namespace ssdda
