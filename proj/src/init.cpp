#include "jsms/init.hpp"

#include <cmath>

#include "jsms/rng.hpp"

namespace jsms {

Tensor xavier_init(const std::vector<int64_t>& shape, int64_t fan_in, int64_t fan_out,
                   uint64_t seed) {
    if (fan_in <= 0 || fan_out <= 0) throw ConfigError("xavier_init: fans must be positive");
    const float a = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    Tensor t(shape);
    Rng rng(seed);
    for (int64_t k = 0; k < t.numel(); ++k) t[k] = rng.uniform(-a, a);
    return t;
}

NetworkState init_state(const NetworkSpec& spec, uint64_t seed) {
    spec.check_unique_names();
    NetworkState state;
    int in_ch = spec.in_channels;
    uint64_t stream = 0;
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::Conv) continue;
        const int64_t fan_in = static_cast<int64_t>(in_ch) * l.conv.kernel_h * l.conv.kernel_w;
        const int64_t fan_out =
            static_cast<int64_t>(l.out_channels) * l.conv.kernel_h * l.conv.kernel_w;
        state.weights[l.name] = xavier_init({l.out_channels, in_ch, l.conv.kernel_h, l.conv.kernel_w},
                                            fan_in, fan_out, stream_seed(seed, stream++));
        state.biases[l.name] = Tensor({l.out_channels});
        in_ch = l.out_channels;
    }
    return state;
}

NetworkState transfer_extend_head(const TransferPlan& plan, uint64_t seed) {
    const NetworkSpec& src = *plan.source_spec;
    const NetworkSpec& dst = *plan.target_spec;
    const NetworkState& sstate = *plan.source_state;
    const int C = plan.semantic_classes;
    const int M = plan.motion_classes;
    if (C <= 0 || M < 0) throw ConfigError("transfer_extend_head: class counts invalid");
    if (dst.num_classes != C + M) {
        throw StateError("transfer_extend_head: target head has " +
                         std::to_string(dst.num_classes) + " outputs, expected C+M = " +
                         std::to_string(C + M));
    }

    NetworkState out;
    size_t si = 0, di = 0;
    // walk conv layers pairwise; specs must agree everywhere except the head
    std::vector<const LayerSpec*> sconvs, dconvs;
    for (const auto& l : src.layers)
        if (l.kind == LayerKind::Conv) sconvs.push_back(&l);
    for (const auto& l : dst.layers)
        if (l.kind == LayerKind::Conv) dconvs.push_back(&l);
    if (sconvs.size() != dconvs.size()) {
        throw StateError("transfer_extend_head: layer count mismatch between source and target");
    }
    for (si = 0; si < sconvs.size(); ++si) {
        const LayerSpec& sl = *sconvs[si];
        const LayerSpec& dl = *dconvs[si];
        const Tensor& sw = sstate.weights.at(sl.name);
        const Tensor& sb = sstate.biases.at(sl.name);
        if (dl.role != RoleTag::Head) {
            if (sl.out_channels != dl.out_channels || sw.dim(2) != dl.conv.kernel_h ||
                sw.dim(3) != dl.conv.kernel_w) {
                throw StateError("transfer_extend_head: non-head layer shape mismatch at " +
                                 dl.name);
            }
            out.weights[dl.name] = sw;
            out.biases[dl.name] = sb;
            continue;
        }
        // head: copy [0,C), draw [C,C+M) fresh
        if (sw.dim(0) != C) {
            throw StateError("transfer_extend_head: source head has " + std::to_string(sw.dim(0)) +
                             " outputs, expected C = " + std::to_string(C));
        }
        const int64_t in_ch = sw.dim(1), kh = sw.dim(2), kw = sw.dim(3);
        Tensor w({C + M, in_ch, kh, kw});
        Tensor b({C + M});
        const int64_t per_out = in_ch * kh * kw;
        for (int64_t k = 0; k < C * per_out; ++k) w[k] = sw[k];
        for (int64_t k = 0; k < C; ++k) b[k] = sb[k];
        if (M > 0) {
            const int64_t fan_in = per_out;
            const int64_t fan_out = static_cast<int64_t>(C + M) * kh * kw;
            Tensor fresh = xavier_init({M, in_ch, kh, kw}, fan_in, fan_out, seed);
            for (int64_t k = 0; k < fresh.numel(); ++k) w[C * per_out + k] = fresh[k];
            // new-motion-channel biases stay zero
        }
        out.weights[dl.name] = std::move(w);
        out.biases[dl.name] = std::move(b);
    }
    (void)di;
    return out;
}

void identity_init_context(const NetworkSpec& spec, NetworkState& state) {
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::Conv || l.role != RoleTag::Context) continue;
        const Tensor& w = state.weights.at(l.name);
        if (w.dim(0) != w.dim(1)) {
            throw ConfigError("identity_init_context: layer " + l.name +
                              " has unequal in/out channels " + w.shape_str());
        }
        if (l.conv.kernel_h != 3 || l.conv.kernel_w != 3) {
            throw ConfigError("identity_init_context: layer " + l.name + " is not a 3x3 conv");
        }
        Tensor iw(w.shape());
        const int64_t C = w.dim(0);
        for (int64_t j = 0; j < C; ++j) iw[iw.idx4(j, j, 1, 1)] = 1.0f;  // center tap only
        state.weights[l.name] = std::move(iw);
        state.biases[l.name] = Tensor({C});
    }
}

}  // namespace jsms
