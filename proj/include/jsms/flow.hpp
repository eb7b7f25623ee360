#pragma once

#include <string>
#include <vector>

#include "jsms/net.hpp"
#include "jsms/tensor.hpp"

namespace jsms {

/// Per-pixel (u, v) displacement from frame t to t+1, in pixels.
struct FlowField {
    int64_t width = 0;
    int64_t height = 0;
    std::vector<float> u;  // row-major
    std::vector<float> v;

    int64_t numel() const { return width * height; }
    float& u_at(int64_t y, int64_t x) { return u[static_cast<size_t>(y * width + x)]; }
    float& v_at(int64_t y, int64_t x) { return v[static_cast<size_t>(y * width + x)]; }
    float u_at(int64_t y, int64_t x) const { return u[static_cast<size_t>(y * width + x)]; }
    float v_at(int64_t y, int64_t x) const { return v[static_cast<size_t>(y * width + x)]; }
};

/// Euclidean norm per pixel, as a [H,W] tensor.
Tensor flow_magnitude(const FlowField& flow);

/// Min-max scales magnitudes to [1,2] and quantizes to 256 uniform levels
/// (level k dequantizes to 1 + k/255, the grayscale-image reading). A
/// constant field maps to all 1.0.
Tensor normalize_quantize(const Tensor& mags);

/// Area-average downscale to the feature grid; values stay in [1,2].
/// Upsizing is served bilinearly (atypical, flagged on stderr).
Tensor resize_to_feature_grid(const Tensor& map, int64_t target_h, int64_t target_w);

/// out[n,c,y,x] = features[n,c,y,x] * amp[y,x]. amp >= 1 never zeroes features.
Tensor amplify(const Tensor& features, const Tensor& amp);

/// Marks every feature_conv layer frozen; fully connected and head layers
/// stay trainable. Idempotent.
NetworkSpec freeze_feature_convs(const NetworkSpec& spec);

/// Convenience: image-scale amplifier map for a flow field.
Tensor amplifier_from_flow(const FlowField& flow);

// Middlebury .flo: float magic 202021.25, int32 width, int32 height, then
// row-major interleaved float32 (u, v), little-endian.
FlowField read_flo(const std::string& path);
void write_flo(const FlowField& flow, const std::string& path);

}  // namespace jsms
