#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jsms/ops.hpp"
#include "jsms/tape.hpp"
#include "jsms/tensor.hpp"

namespace jsms {

enum class LayerKind { Conv, Pool, Relu, Softmax, Upsample };

enum class RoleTag { FeatureConv, Context, FullyConnected, Head };

struct LayerSpec {
    LayerKind kind = LayerKind::Conv;
    std::string name;
    RoleTag role = RoleTag::FeatureConv;
    // conv only
    int out_channels = 0;
    ConvParams conv;
    bool freeze = false;
    // upsample only
    int factor = 1;
};

enum class Preset { Toy, ToyPooled, FullScale };

struct NetworkSpec {
    std::vector<LayerSpec> layers;
    int in_channels = 3;
    int num_classes = 0;
    Preset preset = Preset::Toy;
    /// Index of the first layer after the feature-conv section. The flow
    /// amplifier multiplies the activation entering this layer; the context
    /// module is spliced here.
    int amplify_pos = 0;

    const LayerSpec* find(const std::string& name) const;
    bool has_context() const;
    /// Product of all pool/conv strides (spatial downsample of the head grid).
    int downsample_factor() const;
    /// Channel count of the feature maps at amplify_pos.
    int feature_channels() const;
    void check_unique_names() const;
};

struct NetworkState {
    std::map<std::string, Tensor> weights;
    std::map<std::string, Tensor> biases;

    int64_t param_count() const;
};

/// Builds the dilated front-end for the given preset with a (C+M)-way head.
NetworkSpec build_front_end(Preset preset, int num_classes);
NetworkSpec build_front_end(const std::string& preset, int num_classes);

/// Removes the last n pooling layers and doubles the dilation (and same-pad)
/// of every conv that followed each removed pool. Parameter shapes are
/// untouched, so weights trained on the pooled spec still load.
NetworkSpec apply_pool_removal_surgery(const NetworkSpec& pooled, int n_pools_to_remove);

/// Random (Xavier) initialization of every conv layer.
NetworkState init_state(const NetworkSpec& spec, uint64_t seed);

struct ForwardOptions {
    /// Optional [h,w] amplifier at the feature-grid scale, applied at
    /// spec.amplify_pos.
    const Tensor* amplifier = nullptr;
};

/// Plain inference pass; returns head logits.
Tensor forward(const NetworkSpec& spec, const NetworkState& state, const Tensor& input,
               const ForwardOptions& opts = {});

/// Tape-recorded pass for training. `params` receives the tape ids of each
/// layer's weight/bias so the caller can read gradients back.
struct TapedParams {
    std::map<std::string, GradTape::Id> weight_ids;
    std::map<std::string, GradTape::Id> bias_ids;
};
GradTape::Id forward_taped(GradTape& tape, const NetworkSpec& spec, const NetworkState& state,
                           const Tensor& input, const ForwardOptions& opts, TapedParams* params,
                           int first_layer = 0);

/// Per-pixel class map produced by softmax -> bilinear upsample by the
/// downsample factor -> argmax (lowest index wins ties).
struct LabelMap {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<uint8_t> idx;

    uint8_t& at(int64_t y, int64_t x) { return idx[static_cast<size_t>(y * width + x)]; }
    uint8_t at(int64_t y, int64_t x) const { return idx[static_cast<size_t>(y * width + x)]; }
};

LabelMap predict_labels(const NetworkSpec& spec, const NetworkState& state, const Tensor& input,
                        const ForwardOptions& opts = {});

}  // namespace jsms
