#include "jsms/tape.hpp"

#include <memory>
#include <utility>

namespace jsms {

GradTape::Id GradTape::watch(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, Tensor(), false});
    return static_cast<Id>(nodes_.size() - 1);
}

GradTape::Id GradTape::record(Tensor value, std::vector<Id> inputs, BackFn back) {
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(back), Tensor(), false});
    return static_cast<Id>(nodes_.size() - 1);
}

void GradTape::backward(Id root, const Tensor& upstream) {
    if (ran_backward_) throw StateError("GradTape: backward already ran on this tape");
    ran_backward_ = true;
    Node& r = nodes_.at(static_cast<size_t>(root));
    if (!upstream.same_shape(r.value)) {
        throw DimensionError("GradTape: upstream shape " + upstream.shape_str() +
                             " does not match node value " + r.value.shape_str());
    }
    r.grad = upstream;
    r.touched = true;
    for (Id id = root; id >= 0; --id) {
        Node& node = nodes_[static_cast<size_t>(id)];
        if (!node.touched || !node.back) continue;
        std::vector<const Tensor*> ins;
        ins.reserve(node.inputs.size());
        for (Id in : node.inputs) ins.push_back(&nodes_[static_cast<size_t>(in)].value);
        std::vector<Tensor> gs = node.back(node.grad, ins);
        if (gs.size() != node.inputs.size()) {
            throw StateError("GradTape: adjoint count mismatch");
        }
        for (size_t k = 0; k < gs.size(); ++k) {
            Node& in = nodes_[static_cast<size_t>(node.inputs[k])];
            if (gs[k].numel() == 0) continue;  // input without gradient path
            if (!in.touched) {
                in.grad = std::move(gs[k]);
                in.touched = true;
            } else {
                in.grad = add(in.grad, gs[k]);
            }
        }
    }
}

const Tensor& GradTape::grad(Id id) const {
    const Node& n = nodes_.at(static_cast<size_t>(id));
    if (!n.touched) {
        static thread_local Tensor zeros;
        zeros = Tensor(n.value.shape());
        return zeros;
    }
    return n.grad;
}

GradTape::Id t_conv2d(GradTape& tape, GradTape::Id input, GradTape::Id weight, GradTape::Id bias,
                      const ConvParams& p) {
    Tensor out = dilated_conv2d(tape.value(input), tape.value(weight), tape.value(bias), p);
    return tape.record(std::move(out), {input, weight, bias},
                       [p](const Tensor& up, const std::vector<const Tensor*>& ins) {
                           Tensor gin, gw, gb;
                           dilated_conv2d_backward(*ins[0], *ins[1], p, up, &gin, &gw, &gb);
                           std::vector<Tensor> gs;
                           gs.push_back(std::move(gin));
                           gs.push_back(std::move(gw));
                           gs.push_back(std::move(gb));
                           return gs;
                       });
}

GradTape::Id t_max_pool2d(GradTape& tape, GradTape::Id input) {
    auto argmax = std::make_shared<std::vector<int64_t>>();
    Tensor out = max_pool2d(tape.value(input), argmax.get());
    return tape.record(std::move(out), {input},
                       [argmax](const Tensor& up, const std::vector<const Tensor*>& ins) {
                           std::vector<Tensor> gs;
                           gs.push_back(max_pool2d_backward(ins[0]->shape(), *argmax, up));
                           return gs;
                       });
}

GradTape::Id t_relu(GradTape& tape, GradTape::Id input) {
    Tensor out = relu(tape.value(input));
    return tape.record(std::move(out), {input},
                       [](const Tensor& up, const std::vector<const Tensor*>& ins) {
                           std::vector<Tensor> gs;
                           gs.push_back(relu_backward(*ins[0], up));
                           return gs;
                       });
}

GradTape::Id t_softmax_channels(GradTape& tape, GradTape::Id input) {
    Tensor out = softmax_channels(tape.value(input));
    Tensor saved = out;
    return tape.record(std::move(out), {input},
                       [saved](const Tensor& up, const std::vector<const Tensor*>&) {
                           std::vector<Tensor> gs;
                           gs.push_back(softmax_channels_backward(saved, up));
                           return gs;
                       });
}

GradTape::Id t_bilinear_upsample(GradTape& tape, GradTape::Id input, int factor) {
    Tensor out = bilinear_upsample(tape.value(input), factor);
    return tape.record(std::move(out), {input},
                       [factor](const Tensor& up, const std::vector<const Tensor*>& ins) {
                           std::vector<Tensor> gs;
                           gs.push_back(bilinear_upsample_backward(ins[0]->shape(), factor, up));
                           return gs;
                       });
}

GradTape::Id t_add(GradTape& tape, GradTape::Id a, GradTape::Id b) {
    Tensor out = add(tape.value(a), tape.value(b));
    return tape.record(std::move(out), {a, b},
                       [](const Tensor& up, const std::vector<const Tensor*>&) {
                           std::vector<Tensor> gs;
                           gs.push_back(up);
                           gs.push_back(up);
                           return gs;
                       });
}

GradTape::Id t_mul(GradTape& tape, GradTape::Id a, GradTape::Id b) {
    Tensor out = mul(tape.value(a), tape.value(b));
    return tape.record(std::move(out), {a, b},
                       [](const Tensor& up, const std::vector<const Tensor*>& ins) {
                           std::vector<Tensor> gs;
                           gs.push_back(mul(up, *ins[1]));
                           gs.push_back(mul(up, *ins[0]));
                           return gs;
                       });
}

GradTape::Id t_scale(GradTape& tape, GradTape::Id a, float s) {
    Tensor out = scale(tape.value(a), s);
    return tape.record(std::move(out), {a},
                       [s](const Tensor& up, const std::vector<const Tensor*>&) {
                           std::vector<Tensor> gs;
                           gs.push_back(scale(up, s));
                           return gs;
                       });
}

GradTape::Id t_mul_map(GradTape& tape, GradTape::Id a, Tensor map) {
    Tensor out = mul_map(tape.value(a), map);
    return tape.record(std::move(out), {a},
                       [map](const Tensor& up, const std::vector<const Tensor*>&) {
                           std::vector<Tensor> gs;
                           gs.push_back(mul_map_backward_input(map, up));
                           return gs;
                       });
}

}  // namespace jsms
