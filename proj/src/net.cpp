#include "jsms/net.hpp"

#include <algorithm>
#include <set>

namespace jsms {

const LayerSpec* NetworkSpec::find(const std::string& name) const {
    for (const auto& l : layers) {
        if (l.name == name) return &l;
    }
    return nullptr;
}

bool NetworkSpec::has_context() const {
    return std::any_of(layers.begin(), layers.end(),
                       [](const LayerSpec& l) { return l.role == RoleTag::Context; });
}

int NetworkSpec::downsample_factor() const {
    int f = 1;
    for (const auto& l : layers) {
        if (l.kind == LayerKind::Pool) f *= 2;
        if (l.kind == LayerKind::Conv) f *= l.conv.stride;
    }
    return f;
}

int NetworkSpec::feature_channels() const {
    int ch = in_channels;
    for (int i = 0; i < amplify_pos && i < static_cast<int>(layers.size()); ++i) {
        if (layers[static_cast<size_t>(i)].kind == LayerKind::Conv) {
            ch = layers[static_cast<size_t>(i)].out_channels;
        }
    }
    return ch;
}

void NetworkSpec::check_unique_names() const {
    std::set<std::string> seen;
    for (const auto& l : layers) {
        if (l.kind != LayerKind::Conv) continue;
        if (!seen.insert(l.name).second) {
            throw ConfigError("duplicate layer name: " + l.name);
        }
    }
}

int64_t NetworkState::param_count() const {
    int64_t n = 0;
    for (const auto& [k, t] : weights) n += t.numel();
    for (const auto& [k, t] : biases) n += t.numel();
    return n;
}

namespace {

LayerSpec conv_layer(std::string name, int out_ch, int kernel, int dilation, RoleTag role) {
    LayerSpec l;
    l.kind = LayerKind::Conv;
    l.name = std::move(name);
    l.role = role;
    l.out_channels = out_ch;
    l.conv.kernel_h = kernel;
    l.conv.kernel_w = kernel;
    l.conv.dilation = dilation;
    l.conv.pad = (kernel - 1) * dilation / 2;  // same padding
    return l;
}

LayerSpec relu_layer(RoleTag role) {
    LayerSpec l;
    l.kind = LayerKind::Relu;
    l.role = role;
    return l;
}

LayerSpec pool_layer(std::string name) {
    LayerSpec l;
    l.kind = LayerKind::Pool;
    l.name = std::move(name);
    return l;
}

NetworkSpec build_toy(int num_classes, bool pooled) {
    NetworkSpec s;
    s.preset = pooled ? Preset::ToyPooled : Preset::Toy;
    s.num_classes = num_classes;
    const int d3 = pooled ? 1 : 2;  // block-3 dilation stands in for the removed pool
    auto fc = RoleTag::FullyConnected;
    s.layers = {
        conv_layer("conv1a", 16, 3, 1, RoleTag::FeatureConv), relu_layer(RoleTag::FeatureConv),
        conv_layer("conv1b", 16, 3, 1, RoleTag::FeatureConv), relu_layer(RoleTag::FeatureConv),
        pool_layer("pool1"),
        conv_layer("conv2a", 32, 3, 1, RoleTag::FeatureConv), relu_layer(RoleTag::FeatureConv),
        conv_layer("conv2b", 32, 3, 1, RoleTag::FeatureConv), relu_layer(RoleTag::FeatureConv),
        pool_layer("pool2"),
        conv_layer("conv3a", 64, 3, d3, RoleTag::FeatureConv), relu_layer(RoleTag::FeatureConv),
        conv_layer("conv3b", 64, 3, d3, RoleTag::FeatureConv), relu_layer(RoleTag::FeatureConv),
    };
    if (pooled) s.layers.push_back(pool_layer("pool3"));
    s.amplify_pos = static_cast<int>(s.layers.size());
    s.layers.push_back(conv_layer("fc1", 128, 3, pooled ? 1 : 2, fc));
    s.layers.push_back(relu_layer(fc));
    s.layers.push_back(conv_layer("fc2", 128, 1, 1, fc));
    s.layers.push_back(relu_layer(fc));
    s.layers.push_back(conv_layer("head", num_classes, 1, 1, RoleTag::Head));
    return s;
}

NetworkSpec build_full_scale(int num_classes) {
    NetworkSpec s;
    s.preset = Preset::FullScale;
    s.num_classes = num_classes;
    auto ft = RoleTag::FeatureConv;
    auto block = [&](const std::string& prefix, int n, int ch, int dilation) {
        for (int i = 1; i <= n; ++i) {
            s.layers.push_back(conv_layer(prefix + "_" + std::to_string(i), ch, 3, dilation, ft));
            s.layers.push_back(relu_layer(ft));
        }
    };
    block("conv1", 2, 64, 1);
    s.layers.push_back(pool_layer("pool1"));
    block("conv2", 2, 128, 1);
    s.layers.push_back(pool_layer("pool2"));
    block("conv3", 3, 256, 1);
    s.layers.push_back(pool_layer("pool3"));
    block("conv4", 3, 512, 1);  // pool4 removed
    block("conv5", 3, 512, 2);  // dilation doubled once past removed pool4; pool5 removed
    s.amplify_pos = static_cast<int>(s.layers.size());
    auto fc = RoleTag::FullyConnected;
    s.layers.push_back(conv_layer("fc6", 4096, 7, 4, fc));  // doubled again past removed pool5
    s.layers.push_back(relu_layer(fc));
    s.layers.push_back(conv_layer("fc7", 4096, 1, 1, fc));
    s.layers.push_back(relu_layer(fc));
    s.layers.push_back(conv_layer("head", num_classes, 1, 1, RoleTag::Head));
    return s;
}

}  // namespace

NetworkSpec build_front_end(Preset preset, int num_classes) {
    if (num_classes < 2) throw ConfigError("build_front_end: num_classes must be >= 2");
    switch (preset) {
        case Preset::Toy:
            return build_toy(num_classes, false);
        case Preset::ToyPooled:
            return build_toy(num_classes, true);
        case Preset::FullScale:
            return build_full_scale(num_classes);
    }
    throw ConfigError("build_front_end: unknown preset");
}

NetworkSpec build_front_end(const std::string& preset, int num_classes) {
    if (preset == "toy") return build_front_end(Preset::Toy, num_classes);
    if (preset == "toy_pooled") return build_front_end(Preset::ToyPooled, num_classes);
    if (preset == "full_scale") return build_front_end(Preset::FullScale, num_classes);
    throw ConfigError("build_front_end: unknown preset '" + preset + "'");
}

NetworkSpec apply_pool_removal_surgery(const NetworkSpec& pooled, int n_pools_to_remove) {
    int n_pools = 0;
    for (const auto& l : pooled.layers) {
        if (l.kind == LayerKind::Pool) ++n_pools;
    }
    if (n_pools_to_remove < 0 || n_pools_to_remove > n_pools) {
        throw ConfigError("apply_pool_removal_surgery: spec has " + std::to_string(n_pools) +
                          " pools, cannot remove " + std::to_string(n_pools_to_remove));
    }
    const int first_removed = n_pools - n_pools_to_remove;  // pools [first_removed, n_pools) go
    NetworkSpec out = pooled;
    out.layers.clear();
    int pool_seen = 0;
    int removed_so_far = 0;
    int amplify_shift = 0;
    for (size_t i = 0; i < pooled.layers.size(); ++i) {
        LayerSpec l = pooled.layers[i];
        if (l.kind == LayerKind::Pool) {
            if (pool_seen >= first_removed) {
                ++pool_seen;
                ++removed_so_far;
                if (static_cast<int>(i) < pooled.amplify_pos) ++amplify_shift;
                continue;  // dropped
            }
            ++pool_seen;
        } else if (l.kind == LayerKind::Conv && removed_so_far > 0) {
            const int mult = 1 << removed_so_far;
            l.conv.dilation *= mult;
            l.conv.pad *= mult;  // preserves same-padding; shapes untouched
        }
        out.layers.push_back(l);
    }
    out.amplify_pos = pooled.amplify_pos - amplify_shift;
    return out;
}

Tensor forward(const NetworkSpec& spec, const NetworkState& state, const Tensor& input,
               const ForwardOptions& opts) {
    Tensor x = input;
    for (int i = 0; i < static_cast<int>(spec.layers.size()); ++i) {
        if (i == spec.amplify_pos && opts.amplifier) x = mul_map(x, *opts.amplifier);
        const LayerSpec& l = spec.layers[static_cast<size_t>(i)];
        switch (l.kind) {
            case LayerKind::Conv: {
                auto wi = state.weights.find(l.name);
                auto bi = state.biases.find(l.name);
                if (wi == state.weights.end() || bi == state.biases.end()) {
                    throw StateError("forward: missing parameters for layer " + l.name);
                }
                x = dilated_conv2d(x, wi->second, bi->second, l.conv);
                break;
            }
            case LayerKind::Pool:
                x = max_pool2d(x);
                break;
            case LayerKind::Relu:
                x = relu(x);
                break;
            case LayerKind::Softmax:
                x = softmax_channels(x);
                break;
            case LayerKind::Upsample:
                x = bilinear_upsample(x, l.factor);
                break;
        }
    }
    return x;
}

GradTape::Id forward_taped(GradTape& tape, const NetworkSpec& spec, const NetworkState& state,
                           const Tensor& input, const ForwardOptions& opts, TapedParams* params,
                           int first_layer) {
    GradTape::Id x = tape.watch(input);
    for (int i = first_layer; i < static_cast<int>(spec.layers.size()); ++i) {
        if (i == spec.amplify_pos && opts.amplifier) x = t_mul_map(tape, x, *opts.amplifier);
        const LayerSpec& l = spec.layers[static_cast<size_t>(i)];
        switch (l.kind) {
            case LayerKind::Conv: {
                GradTape::Id w = tape.watch(state.weights.at(l.name));
                GradTape::Id b = tape.watch(state.biases.at(l.name));
                if (params) {
                    params->weight_ids[l.name] = w;
                    params->bias_ids[l.name] = b;
                }
                x = t_conv2d(tape, x, w, b, l.conv);
                break;
            }
            case LayerKind::Pool:
                x = t_max_pool2d(tape, x);
                break;
            case LayerKind::Relu:
                x = t_relu(tape, x);
                break;
            case LayerKind::Softmax:
                x = t_softmax_channels(tape, x);
                break;
            case LayerKind::Upsample:
                x = t_bilinear_upsample(tape, x, l.factor);
                break;
        }
    }
    return x;
}

LabelMap predict_labels(const NetworkSpec& spec, const NetworkState& state, const Tensor& input,
                        const ForwardOptions& opts) {
    const int f = spec.downsample_factor();
    if (input.dim(2) % f != 0 || input.dim(3) % f != 0) {
        throw DimensionError("predict_labels: input spatial dims " + input.shape_str() +
                             " are not divisible by the downsample factor " + std::to_string(f) +
                             "; pad the input first");
    }
    Tensor logits = forward(spec, state, input, opts);
    Tensor probs = bilinear_upsample(softmax_channels(logits), f);
    const int64_t K = probs.dim(1), H = probs.dim(2), W = probs.dim(3);
    LabelMap out;
    out.height = H;
    out.width = W;
    out.idx.assign(static_cast<size_t>(H * W), 0);
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) {
            int best = 0;
            float bv = probs[probs.idx4(0, 0, y, x)];
            for (int64_t k = 1; k < K; ++k) {
                const float v = probs[probs.idx4(0, k, y, x)];
                if (v > bv) {  // strict: lowest class index wins ties
                    bv = v;
                    best = static_cast<int>(k);
                }
            }
            out.at(y, x) = static_cast<uint8_t>(best);
        }
    }
    return out;
}

}  // namespace jsms
