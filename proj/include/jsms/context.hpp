#pragma once

#include "jsms/net.hpp"

namespace jsms {

/// 7-layer multi-scale aggregation stack: 3x3 convs with dilations
/// 1,1,2,4,8,16,1, padding equal to dilation, ReLU after each of the first
/// six layers. In/out channel count is `channels` throughout, so the stack
/// preserves shape; identity-initialized it relays non-negative inputs
/// exactly.
inline constexpr int kContextDilations[7] = {1, 1, 2, 4, 8, 16, 1};

struct ContextModule {
    std::vector<LayerSpec> layers;
    NetworkState state;
};

ContextModule build_context(int channels);

/// Standalone forward through a context module (for tests and identity checks).
Tensor context_forward(const ContextModule& m, const Tensor& input);

/// Splices an identity-initialized context module into the pipeline at the
/// amplification point, before the fully connected layers. Prediction is
/// bitwise unchanged at insertion time. Rejects a second insertion.
void insert_context(NetworkSpec& spec, NetworkState& state, int channels = 0);

}  // namespace jsms
