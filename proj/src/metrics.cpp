#include "cvgc/metrics.hpp"

#include <cstdio>
#include <sstream>

namespace cvgc {

ConfusionMatrix& ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.num_classes != num_classes)
        throw InvalidArgument("merge: class count mismatch");
    for (std::size_t t = 0; t < counts.size(); ++t) counts[t] += other.counts[t];
    return *this;
}

void accumulate(ConfusionMatrix& cm, const std::vector<Label>& gt,
                const std::vector<Label>& pred, Label ignore_id) {
    if (gt.size() != pred.size())
        throw InvalidArgument("accumulate: gt/pred length mismatch");
    for (std::size_t t = 0; t < gt.size(); ++t) {
        if (gt[t] == ignore_id) continue;
        if (gt[t] >= cm.num_classes || pred[t] >= cm.num_classes)
            throw InvalidArgument("accumulate: label out of range at point " +
                                  std::to_string(t));
        ++cm.at(gt[t], pred[t]);
    }
}

std::vector<ClassIou> iou(const ConfusionMatrix& cm) {
    std::vector<ClassIou> out(cm.num_classes);
    for (std::size_t c = 0; c < cm.num_classes; ++c) {
        ClassIou& r = out[c];
        r.tp = cm.at(c, c);
        for (std::size_t g = 0; g < cm.num_classes; ++g)
            if (g != c) r.fp += cm.at(g, c);
        for (std::size_t p = 0; p < cm.num_classes; ++p)
            if (p != c) r.fn += cm.at(c, p);
        const std::int64_t denom = r.tp + r.fp + r.fn;
        if (denom > 0)
            r.iou = static_cast<double>(r.tp) / static_cast<double>(denom);
    }
    return out;
}

double miou(const ConfusionMatrix& cm) {
    const auto per_class = iou(cm);
    double sum = 0.0;
    std::size_t defined = 0;
    for (const ClassIou& r : per_class) {
        if (!r.iou) continue;
        sum += *r.iou;
        ++defined;
    }
    if (defined == 0) throw EmptyInput("miou: no scored points");
    return sum / static_cast<double>(defined);
}

std::string metrics_report(const ConfusionMatrix& cm) {
    const auto per_class = iou(cm);
    std::ostringstream out;
    char buf[160];
    std::size_t defined = 0;
    double sum = 0.0;
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        const ClassIou& r = per_class[c];
        char num[32] = "undefined";
        if (r.iou) std::snprintf(num, sizeof(num), "%.6f", *r.iou);
        std::snprintf(buf, sizeof(buf), "class=%zu iou=%s tp=%lld fp=%lld fn=%lld\n",
                      c, num, static_cast<long long>(r.tp),
                      static_cast<long long>(r.fp), static_cast<long long>(r.fn));
        out << buf;
        if (r.iou) {
            sum += *r.iou;
            ++defined;
        }
    }
    if (defined == 0) throw EmptyInput("metrics_report: no scored points");
    std::snprintf(buf, sizeof(buf), "miou=%.6f scored_classes=%zu\n",
                  sum / static_cast<double>(defined), defined);
    out << buf;
    return out.str();
}

}  // namespace cvgc
