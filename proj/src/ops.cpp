#include "jsms/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jsms {

namespace {

// reflect-101 mirror: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
inline int64_t mirror(int64_t i, int64_t n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return i;
}

void check_conv_shapes(const Tensor& input, const Tensor& weight, const Tensor& bias,
                       const ConvParams& p) {
    require_rank(input, 4, "dilated_conv2d input");
    require_rank(weight, 4, "dilated_conv2d weight");
    require_rank(bias, 1, "dilated_conv2d bias");
    if (input.dim(1) != weight.dim(1)) {
        throw DimensionError("dilated_conv2d: input channel axis " + std::to_string(input.dim(1)) +
                             " does not match weight channel axis " + std::to_string(weight.dim(1)));
    }
    if (bias.dim(0) != weight.dim(0)) {
        throw DimensionError("dilated_conv2d: bias axis " + std::to_string(bias.dim(0)) +
                             " does not match weight output axis " + std::to_string(weight.dim(0)));
    }
    if (weight.dim(2) != p.kernel_h || weight.dim(3) != p.kernel_w) {
        throw DimensionError("dilated_conv2d: weight spatial axes " + weight.shape_str() +
                             " disagree with ConvParams kernel " + std::to_string(p.kernel_h) + "x" +
                             std::to_string(p.kernel_w));
    }
    if (p.stride < 1 || p.dilation < 1 || p.pad < 0) {
        throw ConfigError("dilated_conv2d: stride/dilation must be >= 1 and pad >= 0");
    }
    if (p.pad_mode == PadMode::Reflect && (p.pad >= input.dim(2) || p.pad >= input.dim(3))) {
        throw DimensionError("dilated_conv2d: reflect pad " + std::to_string(p.pad) +
                             " too large for input extent " + input.shape_str());
    }
    const int64_t span_h = static_cast<int64_t>(p.kernel_h - 1) * p.dilation + 1;
    const int64_t span_w = static_cast<int64_t>(p.kernel_w - 1) * p.dilation + 1;
    if (input.dim(2) + 2 * p.pad < span_h) {
        throw DimensionError("dilated_conv2d: padded height " +
                             std::to_string(input.dim(2) + 2 * p.pad) +
                             " smaller than dilated kernel span " + std::to_string(span_h));
    }
    if (input.dim(3) + 2 * p.pad < span_w) {
        throw DimensionError("dilated_conv2d: padded width " +
                             std::to_string(input.dim(3) + 2 * p.pad) +
                             " smaller than dilated kernel span " + std::to_string(span_w));
    }
}

}  // namespace

int64_t conv_out_extent(int64_t in, int kernel, int stride, int dilation, int pad) {
    const int64_t span = static_cast<int64_t>(kernel - 1) * dilation + 1;
    return (in + 2 * pad - span) / stride + 1;
}

Tensor dilated_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                      const ConvParams& p) {
    check_conv_shapes(input, weight, bias, p);
    const int64_t N = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int64_t Cout = weight.dim(0);
    const int64_t Ho = conv_out_extent(H, p.kernel_h, p.stride, p.dilation, p.pad);
    const int64_t Wo = conv_out_extent(W, p.kernel_w, p.stride, p.dilation, p.pad);

    Tensor out({N, Cout, Ho, Wo});
    const bool reflect = p.pad_mode == PadMode::Reflect;
    const float* in = input.data();
    const float* w = weight.data();
    float* o = out.data();

    for (int64_t n = 0; n < N; ++n) {
        for (int64_t co = 0; co < Cout; ++co) {
            // accumulate in double, store in float
            std::vector<double> acc(static_cast<size_t>(Ho * Wo), static_cast<double>(bias[co]));
            for (int64_t ci = 0; ci < Cin; ++ci) {
                const float* plane = in + (n * Cin + ci) * H * W;
                const float* wk = w + (co * Cin + ci) * p.kernel_h * p.kernel_w;
                for (int64_t y = 0; y < Ho; ++y) {
                    double* arow = acc.data() + y * Wo;
                    for (int i = 0; i < p.kernel_h; ++i) {
                        int64_t iy = y * p.stride + static_cast<int64_t>(i) * p.dilation - p.pad;
                        if (iy < 0 || iy >= H) {
                            if (!reflect) continue;
                            iy = mirror(iy, H);
                        }
                        const float* irow = plane + iy * W;
                        for (int j = 0; j < p.kernel_w; ++j) {
                            const double wv = wk[i * p.kernel_w + j];
                            if (wv == 0.0) continue;
                            const int64_t off = static_cast<int64_t>(j) * p.dilation - p.pad;
                            if (reflect) {
                                for (int64_t x = 0; x < Wo; ++x) {
                                    const int64_t ix = mirror(x * p.stride + off, W);
                                    arow[x] += wv * static_cast<double>(irow[ix]);
                                }
                            } else {
                                // branch-free interior: x*s+off in [0, W)
                                const int64_t x_lo = off < 0 ? (-off + p.stride - 1) / p.stride : 0;
                                const int64_t x_hi = std::min(Wo, (W - off + p.stride - 1) / p.stride);
                                for (int64_t x = x_lo; x < x_hi; ++x) {
                                    arow[x] += wv * static_cast<double>(irow[x * p.stride + off]);
                                }
                            }
                        }
                    }
                }
            }
            float* orow = o + (n * Cout + co) * Ho * Wo;
            for (int64_t k = 0; k < Ho * Wo; ++k) orow[k] = static_cast<float>(acc[static_cast<size_t>(k)]);
        }
    }
    return out;
}

void dilated_conv2d_backward(const Tensor& input, const Tensor& weight, const ConvParams& p,
                             const Tensor& upstream, Tensor* grad_input, Tensor* grad_weight,
                             Tensor* grad_bias) {
    const int64_t N = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int64_t Cout = weight.dim(0);
    const int64_t Ho = conv_out_extent(H, p.kernel_h, p.stride, p.dilation, p.pad);
    const int64_t Wo = conv_out_extent(W, p.kernel_w, p.stride, p.dilation, p.pad);
    if (upstream.rank() != 4 || upstream.dim(0) != N || upstream.dim(1) != Cout ||
        upstream.dim(2) != Ho || upstream.dim(3) != Wo) {
        throw DimensionError("dilated_conv2d_backward: upstream shape " + upstream.shape_str() +
                             " does not match forward output");
    }
    const bool reflect = p.pad_mode == PadMode::Reflect;
    const float* in = input.data();
    const float* w = weight.data();
    const float* up = upstream.data();

    std::vector<double> gin(grad_input ? static_cast<size_t>(input.numel()) : 0, 0.0);
    std::vector<double> gw(grad_weight ? static_cast<size_t>(weight.numel()) : 0, 0.0);
    std::vector<double> gb(grad_bias ? static_cast<size_t>(Cout) : 0, 0.0);

    for (int64_t n = 0; n < N; ++n) {
        for (int64_t co = 0; co < Cout; ++co) {
            const float* urow0 = up + (n * Cout + co) * Ho * Wo;
            if (grad_bias) {
                double s = 0.0;
                for (int64_t k = 0; k < Ho * Wo; ++k) s += urow0[k];
                gb[static_cast<size_t>(co)] += s;
            }
            if (!grad_input && !grad_weight) continue;
            for (int64_t ci = 0; ci < Cin; ++ci) {
                const float* plane = in + (n * Cin + ci) * H * W;
                const float* wk = w + (co * Cin + ci) * p.kernel_h * p.kernel_w;
                double* gplane = grad_input ? gin.data() + (n * Cin + ci) * H * W : nullptr;
                double* gwk = grad_weight ? gw.data() + (co * Cin + ci) * p.kernel_h * p.kernel_w
                                          : nullptr;
                for (int64_t y = 0; y < Ho; ++y) {
                    const float* urow = urow0 + y * Wo;
                    for (int i = 0; i < p.kernel_h; ++i) {
                        int64_t iy = y * p.stride + static_cast<int64_t>(i) * p.dilation - p.pad;
                        if (iy < 0 || iy >= H) {
                            if (!reflect) continue;
                            iy = mirror(iy, H);
                        }
                        for (int j = 0; j < p.kernel_w; ++j) {
                            const int64_t off = static_cast<int64_t>(j) * p.dilation - p.pad;
                            const double wv = wk[i * p.kernel_w + j];
                            double gw_acc = 0.0;
                            if (reflect) {
                                for (int64_t x = 0; x < Wo; ++x) {
                                    const int64_t ix = mirror(x * p.stride + off, W);
                                    const double u = urow[x];
                                    if (gplane) gplane[iy * W + ix] += u * wv;
                                    gw_acc += u * static_cast<double>(plane[iy * W + ix]);
                                }
                            } else {
                                const int64_t x_lo = off < 0 ? (-off + p.stride - 1) / p.stride : 0;
                                const int64_t x_hi = std::min(Wo, (W - off + p.stride - 1) / p.stride);
                                for (int64_t x = x_lo; x < x_hi; ++x) {
                                    const int64_t ix = x * p.stride + off;
                                    const double u = urow[x];
                                    if (gplane) gplane[iy * W + ix] += u * wv;
                                    gw_acc += u * static_cast<double>(plane[iy * W + ix]);
                                }
                            }
                            if (gwk) gwk[i * p.kernel_w + j] += gw_acc;
                        }
                    }
                }
            }
        }
    }
    if (grad_input) {
        *grad_input = Tensor(input.shape());
        for (int64_t k = 0; k < input.numel(); ++k)
            (*grad_input)[k] = static_cast<float>(gin[static_cast<size_t>(k)]);
    }
    if (grad_weight) {
        *grad_weight = Tensor(weight.shape());
        for (int64_t k = 0; k < weight.numel(); ++k)
            (*grad_weight)[k] = static_cast<float>(gw[static_cast<size_t>(k)]);
    }
    if (grad_bias) {
        *grad_bias = Tensor({Cout});
        for (int64_t k = 0; k < Cout; ++k)
            (*grad_bias)[k] = static_cast<float>(gb[static_cast<size_t>(k)]);
    }
}

Tensor max_pool2d(const Tensor& input, std::vector<int64_t>* argmax) {
    require_rank(input, 4, "max_pool2d input");
    const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    if (H < 2 || W < 2) throw DimensionError("max_pool2d: spatial dims must be >= 2");
    const int64_t Ho = H / 2, Wo = W / 2;  // odd trailing row/col truncated
    Tensor out({N, C, Ho, Wo});
    if (argmax) argmax->assign(static_cast<size_t>(out.numel()), 0);
    const float* in = input.data();
    float* o = out.data();
    int64_t oi = 0;
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const float* plane = in + nc * H * W;
        for (int64_t y = 0; y < Ho; ++y) {
            for (int64_t x = 0; x < Wo; ++x, ++oi) {
                float best = -std::numeric_limits<float>::infinity();
                int64_t besti = -1;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const int64_t idx = (2 * y + dy) * W + (2 * x + dx);
                        if (plane[idx] > best) {  // strict: first occurrence wins ties
                            best = plane[idx];
                            besti = idx;
                        }
                    }
                }
                o[oi] = best;
                if (argmax) (*argmax)[static_cast<size_t>(oi)] = nc * H * W + besti;
            }
        }
    }
    return out;
}

Tensor max_pool2d_backward(const std::vector<int64_t>& input_shape,
                           const std::vector<int64_t>& argmax, const Tensor& upstream) {
    if (argmax.size() != static_cast<size_t>(upstream.numel())) {
        throw StateError("max_pool2d_backward: argmax record does not match upstream");
    }
    Tensor gin(input_shape);
    for (int64_t k = 0; k < upstream.numel(); ++k) {
        gin[argmax[static_cast<size_t>(k)]] += upstream[k];
    }
    return gin;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape());
    for (int64_t k = 0; k < input.numel(); ++k) out[k] = input[k] > 0.0f ? input[k] : 0.0f;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
    if (!input.same_shape(upstream)) throw DimensionError("relu_backward: shape mismatch");
    Tensor gin(input.shape());
    for (int64_t k = 0; k < input.numel(); ++k) gin[k] = input[k] > 0.0f ? upstream[k] : 0.0f;
    return gin;
}

Tensor softmax_channels(const Tensor& input) {
    require_rank(input, 4, "softmax_channels input");
    const int64_t N = input.dim(0), K = input.dim(1), H = input.dim(2), W = input.dim(3);
    Tensor out(input.shape());
    for (int64_t n = 0; n < N; ++n) {
        for (int64_t y = 0; y < H; ++y) {
            for (int64_t x = 0; x < W; ++x) {
                float mx = -std::numeric_limits<float>::infinity();
                for (int64_t k = 0; k < K; ++k) mx = std::max(mx, input[input.idx4(n, k, y, x)]);
                double denom = 0.0;
                for (int64_t k = 0; k < K; ++k) {
                    denom += std::exp(static_cast<double>(input[input.idx4(n, k, y, x)] - mx));
                }
                for (int64_t k = 0; k < K; ++k) {
                    out[out.idx4(n, k, y, x)] = static_cast<float>(
                        std::exp(static_cast<double>(input[input.idx4(n, k, y, x)] - mx)) / denom);
                }
            }
        }
    }
    return out;
}

Tensor softmax_channels_backward(const Tensor& y, const Tensor& upstream) {
    if (!y.same_shape(upstream)) throw DimensionError("softmax_channels_backward: shape mismatch");
    const int64_t N = y.dim(0), K = y.dim(1), H = y.dim(2), W = y.dim(3);
    Tensor gin(y.shape());
    for (int64_t n = 0; n < N; ++n) {
        for (int64_t yy = 0; yy < H; ++yy) {
            for (int64_t x = 0; x < W; ++x) {
                double dot = 0.0;
                for (int64_t k = 0; k < K; ++k) {
                    dot += static_cast<double>(upstream[y.idx4(n, k, yy, x)]) * y[y.idx4(n, k, yy, x)];
                }
                for (int64_t k = 0; k < K; ++k) {
                    const int64_t i = y.idx4(n, k, yy, x);
                    gin[i] = static_cast<float>(y[i] * (static_cast<double>(upstream[i]) - dot));
                }
            }
        }
    }
    return gin;
}

namespace {

// corner-aligned source coordinate for output index k at the given factor
inline void src_coord(int64_t k, int64_t in_extent, int64_t out_extent, int64_t& lo, int64_t& hi,
                      double& frac) {
    if (out_extent == 1 || in_extent == 1) {
        lo = hi = 0;
        frac = 0.0;
        return;
    }
    const double pos = static_cast<double>(k) * static_cast<double>(in_extent - 1) /
                       static_cast<double>(out_extent - 1);
    lo = static_cast<int64_t>(pos);
    if (lo >= in_extent - 1) lo = in_extent - 2;
    hi = lo + 1;
    frac = pos - static_cast<double>(lo);
}

}  // namespace

Tensor bilinear_upsample(const Tensor& input, int factor) {
    require_rank(input, 4, "bilinear_upsample input");
    if (factor < 1) throw ConfigError("bilinear_upsample: factor must be >= 1");
    if (factor == 1) return input;
    const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int64_t Ho = H * factor, Wo = W * factor;
    Tensor out({N, C, Ho, Wo});
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const float* plane = input.data() + nc * H * W;
        float* oplane = out.data() + nc * Ho * Wo;
        for (int64_t y = 0; y < Ho; ++y) {
            int64_t y0, y1;
            double fy;
            src_coord(y, H, Ho, y0, y1, fy);
            for (int64_t x = 0; x < Wo; ++x) {
                int64_t x0, x1;
                double fx;
                src_coord(x, W, Wo, x0, x1, fx);
                const double v = (1 - fy) * ((1 - fx) * plane[y0 * W + x0] + fx * plane[y0 * W + x1]) +
                                 fy * ((1 - fx) * plane[y1 * W + x0] + fx * plane[y1 * W + x1]);
                oplane[y * Wo + x] = static_cast<float>(v);
            }
        }
    }
    return out;
}

Tensor bilinear_upsample_backward(const std::vector<int64_t>& input_shape, int factor,
                                  const Tensor& upstream) {
    if (factor == 1) return upstream;
    const int64_t N = input_shape[0], C = input_shape[1], H = input_shape[2], W = input_shape[3];
    const int64_t Ho = H * factor, Wo = W * factor;
    Tensor gin(input_shape);
    std::vector<double> acc(static_cast<size_t>(H * W));
    for (int64_t nc = 0; nc < N * C; ++nc) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const float* uplane = upstream.data() + nc * Ho * Wo;
        for (int64_t y = 0; y < Ho; ++y) {
            int64_t y0, y1;
            double fy;
            src_coord(y, H, Ho, y0, y1, fy);
            for (int64_t x = 0; x < Wo; ++x) {
                int64_t x0, x1;
                double fx;
                src_coord(x, W, Wo, x0, x1, fx);
                const double u = uplane[y * Wo + x];
                acc[static_cast<size_t>(y0 * W + x0)] += u * (1 - fy) * (1 - fx);
                acc[static_cast<size_t>(y0 * W + x1)] += u * (1 - fy) * fx;
                acc[static_cast<size_t>(y1 * W + x0)] += u * fy * (1 - fx);
                acc[static_cast<size_t>(y1 * W + x1)] += u * fy * fx;
            }
        }
        float* gplane = gin.data() + nc * H * W;
        for (int64_t k = 0; k < H * W; ++k) gplane[k] = static_cast<float>(acc[static_cast<size_t>(k)]);
    }
    return gin;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor out(a.shape());
    for (int64_t k = 0; k < a.numel(); ++k) out[k] = a[k] + b[k];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("mul: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor out(a.shape());
    for (int64_t k = 0; k < a.numel(); ++k) out[k] = a[k] * b[k];
    return out;
}

Tensor scale(const Tensor& a, float s) {
    Tensor out(a.shape());
    for (int64_t k = 0; k < a.numel(); ++k) out[k] = a[k] * s;
    return out;
}

Tensor mul_map(const Tensor& a, const Tensor& map) {
    require_rank(a, 4, "mul_map input");
    require_rank(map, 2, "mul_map map");
    if (a.dim(2) != map.dim(0) || a.dim(3) != map.dim(1)) {
        throw DimensionError("mul_map: trailing dims of " + a.shape_str() +
                             " do not match map " + map.shape_str());
    }
    Tensor out(a.shape());
    const int64_t HW = a.dim(2) * a.dim(3);
    for (int64_t nc = 0; nc < a.dim(0) * a.dim(1); ++nc) {
        const float* ap = a.data() + nc * HW;
        float* op = out.data() + nc * HW;
        for (int64_t k = 0; k < HW; ++k) op[k] = ap[k] * map[k];
    }
    return out;
}

Tensor mul_map_backward_input(const Tensor& map, const Tensor& upstream) {
    return mul_map(upstream, map);
}

bool all_finite(const Tensor& t) {
    for (int64_t k = 0; k < t.numel(); ++k) {
        if (!std::isfinite(t[k])) return false;
    }
    return true;
}

}  // namespace jsms
