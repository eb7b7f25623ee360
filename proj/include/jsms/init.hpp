#pragma once

#include <cstdint>

#include "jsms/net.hpp"
#include "jsms/tensor.hpp"

namespace jsms {

/// Glorot-uniform: i.i.d. uniform on [-a, a], a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_init(const std::vector<int64_t>& shape, int64_t fan_in, int64_t fan_out,
                   uint64_t seed);

/// Xavier weights + zero biases for every conv layer of a spec.
NetworkState init_state(const NetworkSpec& spec, uint64_t seed);

struct TransferPlan {
    const NetworkSpec* source_spec = nullptr;
    const NetworkState* source_state = nullptr;
    const NetworkSpec* target_spec = nullptr;
    int semantic_classes = 0;  // C
    int motion_classes = 0;    // M
};

/// Copies every non-head parameter bitwise, copies head output channels
/// [0, C) bitwise and draws channels [C, C+M) with Xavier (zero biases).
/// Target logits on channels [0, C) equal source logits exactly.
NetworkState transfer_extend_head(const TransferPlan& plan, uint64_t seed);

/// Identity initialization for a stack of 3x3 convs with equal in/out
/// channels: filter is 1 at the spatial center on matching channel pairs,
/// 0 elsewhere; biases zero. The stack relays its input unchanged.
void identity_init_context(const NetworkSpec& spec, NetworkState& state);

}  // namespace jsms
