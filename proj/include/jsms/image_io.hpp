#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jsms/net.hpp"

namespace jsms {

/// Interleaved 8-bit RGB raster.
struct ImageU8 {
    int64_t width = 0;
    int64_t height = 0;
    std::vector<uint8_t> rgb;  // 3 bytes per pixel, row-major

    uint8_t& at(int64_t y, int64_t x, int c) {
        return rgb[static_cast<size_t>((y * width + x) * 3 + c)];
    }
    uint8_t at(int64_t y, int64_t x, int c) const {
        return rgb[static_cast<size_t>((y * width + x) * 3 + c)];
    }
};

void write_png_rgb(const ImageU8& img, const std::string& path);
ImageU8 read_png_rgb(const std::string& path);

/// Label maps are stored as single-channel 8-bit PNGs of class indices.
void write_label_map(const LabelMap& map, const std::string& path);
LabelMap read_label_map(const std::string& path);

}  // namespace jsms
