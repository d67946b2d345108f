#include "ssdda/eval.hpp"

#include <string>

#include "ssdda/errors.hpp"

namespace ssdda {

ConfusionMatrix::ConfusionMatrix(int num_classes_)
    : num_classes(num_classes_),
      counts(static_cast<std::size_t>(num_classes_) * num_classes_, 0) {
    if (num_classes_ < 2)
        throw InvalidInput("ConfusionMatrix needs at least 2 classes");
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t sum = 0;
    for (const std::int64_t c : counts)
        sum += c;
    return sum;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.num_classes != num_classes)
        throw InvalidInput("ConfusionMatrix sum: class counts differ");
    for (std::size_t i = 0; i < counts.size(); ++i)
        counts[i] += other.counts[i];
    return *this;
}

void accumulate(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw InvalidInput("accumulate: prediction and ground-truth shapes disagree");
    const int C = cm.num_classes;
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        const std::uint8_t g = gt.data[i];
        if (g == kIgnoreLabel)
            continue;
        const std::uint8_t p = pred.data[i];
        if (p == kIgnoreLabel || p >= C)
            throw InvalidInput("accumulate: prediction contains invalid class " +
                               std::to_string(p));
        if (g >= C)
            throw InvalidInput("accumulate: ground truth contains invalid class " +
                               std::to_string(g));
        ++cm.at(g, p);
    }
}

std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
    const int C = cm.num_classes;
    std::vector<std::optional<double>> ious(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
        std::int64_t row = 0, col = 0;
        for (int k = 0; k < C; ++k) {
            row += cm.at(c, k);
            col += cm.at(k, c);
        }
        const std::int64_t inter = cm.at(c, c);
        const std::int64_t uni = row + col - inter;
        if (uni > 0)
            ious[static_cast<std::size_t>(c)] =
                static_cast<double>(inter) / static_cast<double>(uni);
    }
    return ious;
}

double mean_iou(const ConfusionMatrix& cm, const std::vector<int>& class_subset) {
    const auto ious = iou_per_class(cm);
    double sum = 0.0;
    int defined = 0;
    for (const int c : class_subset) {
        if (c < 0 || c >= cm.num_classes)
            throw InvalidInput("mean_iou: class " + std::to_string(c) + " out of range");
        if (ious[static_cast<std::size_t>(c)]) {
            sum += *ious[static_cast<std::size_t>(c)];
            ++defined;
        }
    }
    if (defined == 0)
        throw DegenerateEval("mean_iou: no class in the subset has a defined IoU");
    return sum / defined;
}

std::vector<int> all_classes(int num_classes) {
    std::vector<int> out(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c)
        out[static_cast<std::size_t>(c)] = c;
    return out;
}

ConfusionMatrix evaluate_network(const SegNetwork& net, const LoadedDataset& dataset,
                                 const std::vector<std::string>& ids) {
    ConfusionMatrix cm(net.config.num_classes);
    for (const auto& id : ids) {
        const LoadedItem& item = dataset.target_item(id);
        const LabelMap pred = argmax_label(forward_probs(net, item.image));
        accumulate(cm, pred, item.label);
    }
    return cm;
}

} // namespace ssdda
