#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "jsms/flow.hpp"
#include "jsms/metrics.hpp"
#include "jsms/net.hpp"
#include "jsms/rng.hpp"
#include "jsms/synth.hpp"

namespace jsms {

enum class Stage { Baseline, Joint, JointContext };

Stage stage_from_string(const std::string& s);

struct TrainConfig {
    Stage stage = Stage::Baseline;
    float learning_rate = 1e-2f;
    float momentum = 0.9f;
    int iterations = 200;
    int batch_size = 1;
    int crop_size = 64;
    int reflect_pad = 8;
    uint64_t seed = 1;
};

// Full-scale stage presets, kept as named documentation values. Desk-scale
// runs override iterations and learning rate explicitly.
inline TrainConfig full_scale_stage_config(Stage stage) {
    TrainConfig c;
    c.stage = stage;
    c.crop_size = 900;
    switch (stage) {
        case Stage::Baseline:
        case Stage::Joint:
            c.learning_rate = 1e-4f;
            c.momentum = 0.9f;
            c.iterations = 10000;
            break;
        case Stage::JointContext:
            c.learning_rate = 1e-5f;
            c.momentum = 0.99f;
            c.iterations = 20000;
            break;
    }
    return c;
}

/// Mean over non-ignored pixels of -log softmax(logits)[label]; gradient is
/// (softmax - onehot)/count at those pixels, zero elsewhere. Throws StateError
/// if every pixel is ignored.
struct LossResult {
    double loss = 0.0;
    Tensor grad;  // d loss / d logits
};
LossResult softmax_xent_loss(const Tensor& logits, const LabelMap& labels);

/// Nearest sampling of a full-resolution label map onto the head grid
/// (cell centers).
LabelMap downsample_labels(const LabelMap& labels, int factor);

/// v <- momentum*v - lr*g; w <- w + v. Velocities persist in `velocity`
/// across calls; frozen parameters are skipped entirely.
void sgd_momentum_step(const NetworkSpec& spec, NetworkState& state,
                       const std::map<std::string, Tensor>& grad_w,
                       const std::map<std::string, Tensor>& grad_b,
                       std::map<std::string, Tensor>& velocity_w,
                       std::map<std::string, Tensor>& velocity_b, float lr, float momentum);

struct AugmentParams {
    int pad = 0;
    int crop = 0;
    int crop_y = 0, crop_x = 0;
    bool flip = false;
};

AugmentParams sample_augment(Rng& rng, int64_t height, int64_t width, int crop, int pad);

struct AugmentedSample {
    ImageU8 image;
    LabelMap labels;
    Tensor amp;  // image-scale amplifier, cropped/flipped in lockstep
};

/// Identical geometric transform (reflect pad -> crop -> optional horizontal
/// mirror) applied to all three rasters. Flow magnitude is flip-invariant so
/// the amplifier is mirrored, never sign-adjusted.
AugmentedSample apply_augment(const ImageU8& image, const LabelMap& labels, const Tensor& amp,
                              const AugmentParams& p);

/// [1,3,H,W] float input in [-1,1].
Tensor image_to_input(const ImageU8& img);

struct StageResult {
    std::vector<double> loss_curve;
};

/// One training stage. Sets the freeze flags the stage demands (feature
/// convs frozen for Joint, everything trainable otherwise) and updates state
/// in place. Stage prerequisites are the caller's concern (the CLI checks
/// checkpoint stages).
StageResult run_stage(const TrainConfig& config, NetworkSpec& spec, NetworkState& state,
                      const std::vector<SampleRecord>& train_samples);

/// Per-sample inference + metric accumulation over a dataset split.
MetricsReport evaluate(const NetworkSpec& spec, const NetworkState& state, bool use_amplifier,
                       const std::vector<SampleRecord>& samples, const Palette& palette);

}  // namespace jsms
