#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jsms/net.hpp"

namespace jsms {

inline constexpr uint8_t kIgnoreIndex = 255;

/// Per-class confusion tallies. tn is derived from the evaluated total so
/// that tp+fp+fn+tn equals the pixel count for every class.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes)
        : tp_(static_cast<size_t>(num_classes), 0),
          fp_(static_cast<size_t>(num_classes), 0),
          fn_(static_cast<size_t>(num_classes), 0) {}

    int num_classes() const { return static_cast<int>(tp_.size()); }
    uint64_t tp(int c) const { return tp_[static_cast<size_t>(c)]; }
    uint64_t fp(int c) const { return fp_[static_cast<size_t>(c)]; }
    uint64_t fn(int c) const { return fn_[static_cast<size_t>(c)]; }
    uint64_t tn(int c) const { return total_ - tp(c) - fp(c) - fn(c); }
    uint64_t total() const { return total_; }

    void add(uint8_t pred, uint8_t gt) {
        ++total_;
        if (pred == gt) {
            ++tp_[pred];
        } else {
            ++fp_[pred];
            ++fn_[gt];
        }
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o);

private:
    std::vector<uint64_t> tp_, fp_, fn_;
    uint64_t total_ = 0;
};

/// Tallies one prediction/ground-truth pair; ignore-index pixels are skipped.
void accumulate_confusion(const LabelMap& pred, const LabelMap& gt, ConfusionMatrix& cm);

/// TP/(TP+FP+FN); nullopt when the class never occurs (excluded from means).
std::optional<double> iou(const ConfusionMatrix& cm, int cls);
/// TP/(TP+FP).
std::optional<double> ppv(const ConfusionMatrix& cm, int cls);

/// Mean over classes with a defined IoU.
std::optional<double> mean_iou(const ConfusionMatrix& cm);

/// Collapses the joint label space into {stationary=0, moving=1}; every class
/// index >= first_moving_class maps to moving.
LabelMap motion_binary_projection(const LabelMap& map, int first_moving_class);

struct MetricsReport {
    std::vector<std::string> class_names;
    ConfusionMatrix per_class;
    ConfusionMatrix motion;  // 2 classes: stationary, moving

    MetricsReport(std::vector<std::string> names, int first_moving)
        : class_names(std::move(names)),
          per_class(static_cast<int>(class_names.size())),
          motion(2),
          first_moving_class(first_moving) {}

    int first_moving_class;

    void add(const LabelMap& pred, const LabelMap& gt);

    /// Fixed line-oriented report: per-class rows (class, TP, FP, FN, IoU),
    /// mean IoU, then the two motion rows plus motion PPV.
    std::string to_text() const;
};

}  // namespace jsms
