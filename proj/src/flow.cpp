#include "jsms/flow.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

namespace jsms {

namespace {
constexpr float kFloMagic = 202021.25f;  // "PIEH"
}

Tensor flow_magnitude(const FlowField& flow) {
    Tensor m({flow.height, flow.width});
    for (int64_t k = 0; k < flow.numel(); ++k) {
        const double u = flow.u[static_cast<size_t>(k)];
        const double v = flow.v[static_cast<size_t>(k)];
        m[k] = static_cast<float>(std::sqrt(u * u + v * v));
    }
    return m;
}

Tensor normalize_quantize(const Tensor& mags) {
    float lo = mags[0], hi = mags[0];
    for (int64_t k = 0; k < mags.numel(); ++k) {
        lo = std::min(lo, mags[k]);
        hi = std::max(hi, mags[k]);
    }
    Tensor out(mags.shape());
    if (hi <= lo) {  // no motion evidence: leave features untouched
        for (int64_t k = 0; k < out.numel(); ++k) out[k] = 1.0f;
        return out;
    }
    const double span = static_cast<double>(hi) - static_cast<double>(lo);
    for (int64_t k = 0; k < mags.numel(); ++k) {
        const double t = (static_cast<double>(mags[k]) - lo) / span;  // [0,1]
        int level = static_cast<int>(t * 255.0);
        if (level > 255) level = 255;
        if (level < 0) level = 0;
        out[k] = 1.0f + static_cast<float>(level) / 255.0f;
    }
    return out;
}

Tensor resize_to_feature_grid(const Tensor& map, int64_t target_h, int64_t target_w) {
    require_rank(map, 2, "resize_to_feature_grid map");
    if (target_h < 1 || target_w < 1) {
        throw DimensionError("resize_to_feature_grid: targets must be positive");
    }
    const int64_t H = map.dim(0), W = map.dim(1);
    if (target_h == H && target_w == W) return map;
    if (target_h > H || target_w > W) {
        std::cerr << "resize_to_feature_grid: upsizing " << H << "x" << W << " -> " << target_h
                  << "x" << target_w << " is atypical\n";
        // generic corner-aligned bilinear at arbitrary size
        Tensor out({target_h, target_w});
        for (int64_t y = 0; y < target_h; ++y) {
            const double py = target_h == 1 ? 0.0
                                            : static_cast<double>(y) * (H - 1) / (target_h - 1);
            const int64_t y0 = std::min<int64_t>(static_cast<int64_t>(py), H - 1);
            const int64_t y1 = std::min<int64_t>(y0 + 1, H - 1);
            const double fy = py - static_cast<double>(y0);
            for (int64_t x = 0; x < target_w; ++x) {
                const double px = target_w == 1 ? 0.0
                                                : static_cast<double>(x) * (W - 1) / (target_w - 1);
                const int64_t x0 = std::min<int64_t>(static_cast<int64_t>(px), W - 1);
                const int64_t x1 = std::min<int64_t>(x0 + 1, W - 1);
                const double fx = px - static_cast<double>(x0);
                out[out.idx2(y, x)] = static_cast<float>(
                    (1 - fy) * ((1 - fx) * map[map.idx2(y0, x0)] + fx * map[map.idx2(y0, x1)]) +
                    fy * ((1 - fx) * map[map.idx2(y1, x0)] + fx * map[map.idx2(y1, x1)]));
            }
        }
        return out;
    }
    // area average: each output cell averages its (possibly fractional) source region
    Tensor out({target_h, target_w});
    const double sy = static_cast<double>(H) / static_cast<double>(target_h);
    const double sx = static_cast<double>(W) / static_cast<double>(target_w);
    for (int64_t oy = 0; oy < target_h; ++oy) {
        const double y_lo = oy * sy, y_hi = (oy + 1) * sy;
        for (int64_t ox = 0; ox < target_w; ++ox) {
            const double x_lo = ox * sx, x_hi = (ox + 1) * sx;
            double acc = 0.0, area = 0.0;
            for (int64_t y = static_cast<int64_t>(y_lo); y < H && y < y_hi; ++y) {
                const double wy = std::min<double>(y + 1, y_hi) - std::max<double>(y, y_lo);
                if (wy <= 0) continue;
                for (int64_t x = static_cast<int64_t>(x_lo); x < W && x < x_hi; ++x) {
                    const double wx = std::min<double>(x + 1, x_hi) - std::max<double>(x, x_lo);
                    if (wx <= 0) continue;
                    acc += wy * wx * static_cast<double>(map[map.idx2(y, x)]);
                    area += wy * wx;
                }
            }
            out[out.idx2(oy, ox)] = static_cast<float>(acc / area);
        }
    }
    return out;
}

Tensor amplify(const Tensor& features, const Tensor& amp) { return mul_map(features, amp); }

NetworkSpec freeze_feature_convs(const NetworkSpec& spec) {
    NetworkSpec out = spec;
    for (auto& l : out.layers) {
        if (l.kind == LayerKind::Conv && l.role == RoleTag::FeatureConv) l.freeze = true;
    }
    return out;
}

Tensor amplifier_from_flow(const FlowField& flow) {
    return normalize_quantize(flow_magnitude(flow));
}

FlowField read_flo(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open .flo file: " + path);
    float magic;
    f.read(reinterpret_cast<char*>(&magic), 4);
    if (!f || magic != kFloMagic) {
        throw FormatError(".flo magic mismatch at byte offset 0 in " + path);
    }
    int32_t w, h;
    f.read(reinterpret_cast<char*>(&w), 4);
    f.read(reinterpret_cast<char*>(&h), 4);
    if (!f || w <= 0 || h <= 0) {
        throw FormatError(".flo header malformed at byte offset 4 in " + path);
    }
    FlowField flow;
    flow.width = w;
    flow.height = h;
    flow.u.resize(static_cast<size_t>(w) * h);
    flow.v.resize(static_cast<size_t>(w) * h);
    std::vector<float> row(static_cast<size_t>(w) * 2);
    for (int64_t y = 0; y < h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()),
               static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!f) {
            throw FormatError(".flo payload truncated at byte offset " +
                              std::to_string(12 + y * w * 8) + " in " + path);
        }
        for (int64_t x = 0; x < w; ++x) {
            flow.u_at(y, x) = row[static_cast<size_t>(2 * x)];
            flow.v_at(y, x) = row[static_cast<size_t>(2 * x + 1)];
        }
    }
    return flow;
}

void write_flo(const FlowField& flow, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open .flo file for writing: " + path);
    f.write(reinterpret_cast<const char*>(&kFloMagic), 4);
    const int32_t w = static_cast<int32_t>(flow.width), h = static_cast<int32_t>(flow.height);
    f.write(reinterpret_cast<const char*>(&w), 4);
    f.write(reinterpret_cast<const char*>(&h), 4);
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            const float uv[2] = {flow.u_at(y, x), flow.v_at(y, x)};
            f.write(reinterpret_cast<const char*>(uv), 8);
        }
    }
    if (!f) throw FormatError(".flo write failed: " + path);
}

}  // namespace jsms
