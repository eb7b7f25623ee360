#include "jsms/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace jsms {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void write_png_gray_or_rgb(const uint8_t* data, int64_t width, int64_t height, int channels,
                           const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw FormatError("cannot open PNG for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("PNG write failed: " + path);
    }
    png_init_io(png, fp.get());
    // fixed settings keep outputs byte-identical across runs
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int64_t y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(data + y * width * channels));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<uint8_t> read_png(const std::string& path, int want_channels, int64_t& width,
                              int64_t& height) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw FormatError("cannot open PNG: " + path);
    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8)) {
        throw FormatError("not a PNG file (bad signature at byte offset 0): " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("PNG parse failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (want_channels == 3) {
        if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
            png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA) {
            png_set_gray_to_rgb(png);
        }
        png_set_strip_alpha(png);
    } else {
        if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
            png_destroy_read_struct(&png, &info, nullptr);
            throw FormatError("label map PNG must be single-channel gray: " + path);
        }
    }
    png_read_update_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    std::vector<uint8_t> out(static_cast<size_t>(width * height * want_channels));
    for (int64_t y = 0; y < height; ++y) {
        png_read_row(png, out.data() + y * width * want_channels, nullptr);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace

void write_png_rgb(const ImageU8& img, const std::string& path) {
    write_png_gray_or_rgb(img.rgb.data(), img.width, img.height, 3, path);
}

ImageU8 read_png_rgb(const std::string& path) {
    ImageU8 img;
    img.rgb = read_png(path, 3, img.width, img.height);
    return img;
}

void write_label_map(const LabelMap& map, const std::string& path) {
    write_png_gray_or_rgb(map.idx.data(), map.width, map.height, 1, path);
}

LabelMap read_label_map(const std::string& path) {
    LabelMap map;
    map.idx = read_png(path, 1, map.width, map.height);
    return map;
}

}  // namespace jsms
