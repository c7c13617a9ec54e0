// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/common.hpp>

#include <filesystem>
#include <vector>

namespace blrf {

/// Row-major, RGB-interleaved float image with values nominally in [0, 1].
struct Image {
    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

    int width = 0;
    int height = 0;
    std::vector<float> rgb;

    std::size_t index(int row, int col) const { return (static_cast<std::size_t>(row) * width + col) * 3; }
    Vec3 pixel(int row, int col) const
    {
        const std::size_t i = index(row, col);
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }
    void set_pixel(int row, int col, const Vec3& v)
    {
        const std::size_t i = index(row, col);
        rgb[i] = static_cast<float>(v[0]);
        rgb[i + 1] = static_cast<float>(v[1]);
        rgb[i + 2] = static_cast<float>(v[2]);
    }
    bool operator==(const Image&) const = default;
};

/// 8-bit quantization used for PNG output: round-half-up of clamp(v, 0, 1) * 255.
std::uint8_t quantize_unit(float v);

/// Writes an 8-bit RGB PNG.
void write_png(const std::filesystem::path& path, const Image& image);

/// Reads an 8-bit RGB or RGBA PNG as values / 255. Alpha, when present, is
/// composited over `background`.
Image read_png(const std::filesystem::path& path, const Vec3& background);

/// Raw dump: little-endian float32, row-major, RGB interleaved, no header.
void write_raw(const std::filesystem::path& path, const Image& image);
Image read_raw(const std::filesystem::path& path, int width, int height);

} // namespace blrf
