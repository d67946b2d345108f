#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssdda/data.hpp"
#include "ssdda/model.hpp"
#include "ssdda/types.hpp"

namespace ssdda {

/// Pixel counts with rows = ground truth, columns = prediction.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::int64_t> counts;

    explicit ConfusionMatrix(int num_classes_);

    std::int64_t& at(int gt, int pred) {
        return counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }
    std::int64_t at(int gt, int pred) const {
        return counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }
    std::int64_t total() const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

/// Scores one image pair into cm. Ground-truth ignore pixels are skipped;
/// the prediction must be ignore-free.
void accumulate(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt);

/// IoU_c = diag / (row + col - diag); nullopt when the denominator is zero
/// (class absent from both prediction and ground truth).
std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm);

/// Arithmetic mean of the defined IoUs within class_subset. Throws
/// DegenerateEval when every class in the subset is undefined.
double mean_iou(const ConfusionMatrix& cm, const std::vector<int>& class_subset);

std::vector<int> all_classes(int num_classes);

/// Forwards the network over the given target ids and scores argmaxed
/// predictions against ground truth.
ConfusionMatrix evaluate_network(const SegNetwork& net, const LoadedDataset& dataset,
                                 const std::vector<std::string>& ids);

} // namespace ssdda
