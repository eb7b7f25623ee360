#include "jsms/context.hpp"

#include "jsms/init.hpp"

namespace jsms {

ContextModule build_context(int channels) {
    if (channels < 1) throw ConfigError("build_context: channels must be >= 1");
    ContextModule m;
    for (int i = 0; i < 7; ++i) {
        LayerSpec l;
        l.kind = LayerKind::Conv;
        l.name = "ctx" + std::to_string(i + 1);
        l.role = RoleTag::Context;
        l.out_channels = channels;
        l.conv.kernel_h = 3;
        l.conv.kernel_w = 3;
        l.conv.dilation = kContextDilations[i];
        l.conv.pad = kContextDilations[i];  // same-size output
        m.layers.push_back(l);
        if (i < 6) {
            LayerSpec r;
            r.kind = LayerKind::Relu;
            r.role = RoleTag::Context;
            m.layers.push_back(r);
        }
        m.state.weights[l.name] =
            Tensor({channels, channels, 3, 3});
        m.state.biases[l.name] = Tensor({channels});
    }
    NetworkSpec tmp;
    tmp.layers = m.layers;
    identity_init_context(tmp, m.state);
    return m;
}

Tensor context_forward(const ContextModule& m, const Tensor& input) {
    Tensor x = input;
    for (const auto& l : m.layers) {
        if (l.kind == LayerKind::Conv) {
            x = dilated_conv2d(x, m.state.weights.at(l.name), m.state.biases.at(l.name), l.conv);
        } else {
            x = relu(x);
        }
    }
    return x;
}

void insert_context(NetworkSpec& spec, NetworkState& state, int channels) {
    if (spec.has_context()) throw ConfigError("insert_context: context module already present");
    const int feature_ch = spec.feature_channels();
    if (channels == 0) channels = feature_ch;
    if (channels != feature_ch) {
        throw ConfigError("insert_context: context width " + std::to_string(channels) +
                          " does not match feature channels " + std::to_string(feature_ch));
    }
    ContextModule m = build_context(channels);
    spec.layers.insert(spec.layers.begin() + spec.amplify_pos, m.layers.begin(), m.layers.end());
    for (auto& [name, t] : m.state.weights) state.weights[name] = std::move(t);
    for (auto& [name, t] : m.state.biases) state.biases[name] = std::move(t);
    spec.check_unique_names();
}

}  // namespace jsms
