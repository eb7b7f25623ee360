#pragma once

#include <cstdint>
#include <vector>

#include "jsms/tensor.hpp"

namespace jsms {

enum class PadMode { Zero, Reflect };

struct ConvParams {
    int kernel_h = 3;
    int kernel_w = 3;
    int stride = 1;
    int dilation = 1;  // 1 == standard convolution
    int pad = 0;
    PadMode pad_mode = PadMode::Zero;
};

/// Output extent of a strided/dilated convolution along one axis.
int64_t conv_out_extent(int64_t in, int kernel, int stride, int dilation, int pad);

/// out[n,co,y,x] = bias[co] + sum_{ci,i,j} in[n,ci, y*s+i*d-pad, x*s+j*d-pad] * w[co,ci,i,j]
/// Correlation convention; out-of-range taps are zero or reflected per pad_mode.
Tensor dilated_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                      const ConvParams& p);

/// Analytic adjoints. Any of the gradient outputs may be null.
void dilated_conv2d_backward(const Tensor& input, const Tensor& weight, const ConvParams& p,
                             const Tensor& upstream, Tensor* grad_input, Tensor* grad_weight,
                             Tensor* grad_bias);

/// 2x2/stride-2 max pool, floor semantics on odd extents. If argmax is given
/// it receives the flat input index of the winner per output element
/// (first occurrence on ties, row-major window order).
Tensor max_pool2d(const Tensor& input, std::vector<int64_t>* argmax = nullptr);

Tensor max_pool2d_backward(const std::vector<int64_t>& input_shape,
                           const std::vector<int64_t>& argmax, const Tensor& upstream);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

/// Softmax across the channel axis of [N,K,H,W]; each (n,.,y,x) fiber sums to 1.
Tensor softmax_channels(const Tensor& input);
/// Backward given the forward output y: g = y * (up - sum_k up_k y_k).
Tensor softmax_channels_backward(const Tensor& softmax_out, const Tensor& upstream);

/// Bilinear upsample by an integer factor on a corner-aligned grid. Factor 1
/// is the identity.
Tensor bilinear_upsample(const Tensor& input, int factor);
Tensor bilinear_upsample_backward(const std::vector<int64_t>& input_shape, int factor,
                                  const Tensor& upstream);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);

/// Broadcast multiply of a [H,W] map across [N,C,H,W].
Tensor mul_map(const Tensor& a, const Tensor& map);
/// Adjoint w.r.t. the first operand (the map carries no gradient in this
/// pipeline; the flow amplifier is an input, not a parameter).
Tensor mul_map_backward_input(const Tensor& map, const Tensor& upstream);

bool all_finite(const Tensor& t);

}  // namespace jsms
