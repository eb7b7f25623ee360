#include "jsms/metrics.hpp"

#include <cstdio>

namespace jsms {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
    if (o.num_classes() != num_classes()) throw DimensionError("confusion class count mismatch");
    for (size_t c = 0; c < tp_.size(); ++c) {
        tp_[c] += o.tp_[c];
        fp_[c] += o.fp_[c];
        fn_[c] += o.fn_[c];
    }
    total_ += o.total_;
    return *this;
}

void accumulate_confusion(const LabelMap& pred, const LabelMap& gt, ConfusionMatrix& cm) {
    if (pred.width != gt.width || pred.height != gt.height) {
        throw DimensionError("accumulate_confusion: prediction and ground truth dims differ");
    }
    for (size_t k = 0; k < pred.idx.size(); ++k) {
        const uint8_t g = gt.idx[k];
        if (g == kIgnoreIndex) continue;
        cm.add(pred.idx[k], g);
    }
}

std::optional<double> iou(const ConfusionMatrix& cm, int cls) {
    const uint64_t denom = cm.tp(cls) + cm.fp(cls) + cm.fn(cls);
    if (denom == 0) return std::nullopt;
    return static_cast<double>(cm.tp(cls)) / static_cast<double>(denom);
}

std::optional<double> ppv(const ConfusionMatrix& cm, int cls) {
    const uint64_t denom = cm.tp(cls) + cm.fp(cls);
    if (denom == 0) return std::nullopt;
    return static_cast<double>(cm.tp(cls)) / static_cast<double>(denom);
}

std::optional<double> mean_iou(const ConfusionMatrix& cm) {
    double sum = 0.0;
    int n = 0;
    for (int c = 0; c < cm.num_classes(); ++c) {
        if (auto v = iou(cm, c)) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

LabelMap motion_binary_projection(const LabelMap& map, int first_moving_class) {
    LabelMap out;
    out.width = map.width;
    out.height = map.height;
    out.idx.resize(map.idx.size());
    for (size_t k = 0; k < map.idx.size(); ++k) {
        const uint8_t v = map.idx[k];
        out.idx[k] = v == kIgnoreIndex ? kIgnoreIndex
                                       : static_cast<uint8_t>(v >= first_moving_class ? 1 : 0);
    }
    return out;
}

void MetricsReport::add(const LabelMap& pred, const LabelMap& gt) {
    accumulate_confusion(pred, gt, per_class);
    accumulate_confusion(motion_binary_projection(pred, first_moving_class),
                         motion_binary_projection(gt, first_moving_class), motion);
}

namespace {

std::string iou_str(std::optional<double> v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

void append_row(std::string& s, const std::string& name, const ConfusionMatrix& cm, int c) {
    s += name + "\t" + std::to_string(cm.tp(c)) + "\t" + std::to_string(cm.fp(c)) + "\t" +
         std::to_string(cm.fn(c)) + "\t" + iou_str(iou(cm, c)) + "\n";
}

}  // namespace

std::string MetricsReport::to_text() const {
    std::string s = "class\tTP\tFP\tFN\tIoU\n";
    for (int c = 0; c < per_class.num_classes(); ++c) {
        append_row(s, class_names[static_cast<size_t>(c)], per_class, c);
    }
    s += "mean_IoU\t" + iou_str(mean_iou(per_class)) + "\n";
    append_row(s, "stationary", motion, 0);
    append_row(s, "moving", motion, 1);
    s += "motion_IoU\t" + iou_str(iou(motion, 1)) + "\n";
    s += "motion_PPV\t" + iou_str(ppv(motion, 1)) + "\n";
    return s;
}

}  // namespace jsms
