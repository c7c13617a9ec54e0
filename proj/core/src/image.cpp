// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/image.hpp>
#include "binary_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>

namespace blrf {

std::uint8_t quantize_unit(float v)
{
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const
    {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

void write_png(const std::filesystem::path& path, const Image& image)
{
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw IoError("cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, info ? &info : nullptr);
        throw IoError("failed to encode PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(image.width) * 3);
    for (int r = 0; r < image.height; ++r) {
        for (int i = 0; i < image.width * 3; ++i) row[i] = quantize_unit(image.rgb[image.index(r, 0) + i]);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path, const Vec3& background)
{
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw IoError("cannot open image " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        throw IoError("failed to decode PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int color_type = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth != 8 || (color_type != PNG_COLOR_TYPE_RGB && color_type != PNG_COLOR_TYPE_RGBA)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported PNG format in " + path.string() + " (need 8-bit RGB or RGBA)");
    }
    const int channels = color_type == PNG_COLOR_TYPE_RGBA ? 4 : 3;
    std::vector<png_byte> row(static_cast<std::size_t>(width) * channels);
    Image image(width, height);
    for (int r = 0; r < height; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (int c = 0; c < width; ++c) {
            const png_byte* px = row.data() + static_cast<std::size_t>(c) * channels;
            if (channels == 3) {
                image.set_pixel(r, c, {px[0] / 255.0, px[1] / 255.0, px[2] / 255.0});
            } else {
                const double a = px[3] / 255.0;
                Vec3 v;
                for (int k = 0; k < 3; ++k) v[k] = a * (px[k] / 255.0) + (1.0 - a) * background[k];
                image.set_pixel(r, c, v);
            }
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_raw(const std::filesystem::path& path, const Image& image)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    detail::write_f32_array(out, image.rgb);
    if (!out) throw IoError("failed writing " + path.string());
}

Image read_raw(const std::filesystem::path& path, int width, int height)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open raw image " + path.string());
    Image image(width, height);
    detail::read_f32_array(in, image.rgb);
    if (!in) throw IoError("raw image " + path.string() + " is shorter than " + std::to_string(width) + "x" +
                           std::to_string(height) + " RGB");
    in.peek();
    if (!in.eof()) throw IoError("raw image " + path.string() + " is larger than expected");
    return image;
}

} // namespace blrf
