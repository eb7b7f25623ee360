#pragma once

#include <functional>
#include <vector>

#include "jsms/ops.hpp"
#include "jsms/tensor.hpp"

namespace jsms {

/// Reverse-mode tape. Each recorded op stores its output value, the ids of
/// its inputs and a closure producing per-input adjoints. backward() replays
/// the list in reverse, accumulating each node's gradient exactly once per
/// forward use. Confined to one training thread.
class GradTape {
public:
    using Id = int;

    /// Adjoint function: upstream gradient + input values -> per-input grads.
    using BackFn =
        std::function<std::vector<Tensor>(const Tensor& upstream,
                                          const std::vector<const Tensor*>& inputs)>;

    Id watch(Tensor value);  // leaf (parameter or network input)

    Id record(Tensor value, std::vector<Id> inputs, BackFn back);

    const Tensor& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }

    /// Seeds the given node with `upstream` and propagates adjoints to all
    /// ancestors. May be called once per tape.
    void backward(Id root, const Tensor& upstream);

    /// Gradient accumulated at a node; zeros if backward never reached it.
    const Tensor& grad(Id id) const;

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        std::vector<Id> inputs;
        BackFn back;  // empty for leaves
        Tensor grad;
        bool touched = false;
    };
    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

// Tape-recording wrappers around the forward kernels.
GradTape::Id t_conv2d(GradTape& tape, GradTape::Id input, GradTape::Id weight, GradTape::Id bias,
                      const ConvParams& p);
GradTape::Id t_max_pool2d(GradTape& tape, GradTape::Id input);
GradTape::Id t_relu(GradTape& tape, GradTape::Id input);
GradTape::Id t_softmax_channels(GradTape& tape, GradTape::Id input);
GradTape::Id t_bilinear_upsample(GradTape& tape, GradTape::Id input, int factor);
GradTape::Id t_add(GradTape& tape, GradTape::Id a, GradTape::Id b);
GradTape::Id t_mul(GradTape& tape, GradTape::Id a, GradTape::Id b);
GradTape::Id t_scale(GradTape& tape, GradTape::Id a, float s);
/// Amplification: map is a constant [H,W] tensor, no gradient is produced for it.
GradTape::Id t_mul_map(GradTape& tape, GradTape::Id a, Tensor map);

}  // namespace jsms
