#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvgc/core.hpp"

namespace cvgc {

// C x C counts; counts[g * C + p] holds points with ground truth g
// predicted as p. 64-bit so billions of points cannot overflow.
struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::int64_t> counts;

    explicit ConfusionMatrix(std::size_t c) : num_classes(c), counts(c * c, 0) {}

    std::int64_t& at(std::size_t gt, std::size_t pred) {
        return counts[gt * num_classes + pred];
    }
    std::int64_t at(std::size_t gt, std::size_t pred) const {
        return counts[gt * num_classes + pred];
    }

    ConfusionMatrix& merge(const ConfusionMatrix& other);
};

void accumulate(ConfusionMatrix& cm, const std::vector<Label>& gt,
                const std::vector<Label>& pred, Label ignore_id);

struct ClassIou {
    std::optional<double> iou;  // nullopt when TP + FP + FN == 0
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
};

std::vector<ClassIou> iou(const ConfusionMatrix& cm);

// Mean over classes with defined IoU; throws when none is defined.
double miou(const ConfusionMatrix& cm);

// One line per class, final miou line; fixed 6-decimal floats.
std::string metrics_report(const ConfusionMatrix& cm);

}  // namespace cvgc
