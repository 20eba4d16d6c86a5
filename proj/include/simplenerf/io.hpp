// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/common.hpp"
#include "simplenerf/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace snerf::io {

namespace fs = std::filesystem;

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_or_throw(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw DataError("cannot open '" + path.string() + "'");
    return f;
}

inline std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

}  // namespace detail

/// 8-bit PNG, grayscale (channels = 1) or RGB (channels = 3), row-major bytes.
inline void write_png_bytes(const fs::path& path, int width, int height, int channels,
                            const std::vector<std::uint8_t>& bytes) {
    auto f = detail::open_or_throw(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng initialisation failed for '" + path.string() + "'");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG write failed for '" + path.string() + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // no timestamps or other metadata: identical inputs give identical bytes
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        auto* row = const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * width * channels);
        png_write_row(png, row);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline void write_png(const fs::path& path, const Image& image) {
    std::vector<std::uint8_t> bytes(image.rgb.size());
    std::transform(image.rgb.begin(), image.rgb.end(), bytes.begin(), detail::to_byte);
    write_png_bytes(path, image.width, image.height, 3, bytes);
}

inline void write_png(const fs::path& path, const Mask& mask) {
    std::vector<std::uint8_t> bytes(mask.on.size());
    std::transform(mask.on.begin(), mask.on.end(), bytes.begin(), [](std::uint8_t v) { return v ? 255 : 0; });
    write_png_bytes(path, mask.width, mask.height, 1, bytes);
}

/// Reads any 8-bit or 16-bit PNG as RGB in [0, 1].
inline Image read_png(const fs::path& path) {
    auto f = detail::open_or_throw(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng initialisation failed for '" + path.string() + "'");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("malformed PNG '" + path.string() + "'");
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<std::uint8_t> bytes(rowbytes * h);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = bytes.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < 3 * w; ++x)
            img.rgb[static_cast<std::size_t>(y) * 3 * w + x] = bytes[rowbytes * y + x] / 255.0;
    return img;
}

/// Grayscale PFM ("Pf"), little-endian, rows stored bottom to top. Invalid
/// pixels are written as 0.
inline void write_pfm(const fs::path& path, const DepthMap& depth) {
    auto f = detail::open_or_throw(path, "wb");
    const std::string header = "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n-1.0\n";
    std::fwrite(header.data(), 1, header.size(), f.get());
    std::vector<float> row(static_cast<std::size_t>(depth.width));
    for (int y = depth.height - 1; y >= 0; --y) {
        for (int x = 0; x < depth.width; ++x)
            row[static_cast<std::size_t>(x)] = depth.is_valid(x, y) ? static_cast<float>(depth.at(x, y)) : 0.0f;
        if (std::fwrite(row.data(), sizeof(float), row.size(), f.get()) != row.size())
            throw DataError("short write to '" + path.string() + "'");
    }
}

inline DepthMap read_pfm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    in.get();
    if (magic != "Pf" || w <= 0 || h <= 0 || scale >= 0.0)
        throw DataError("unsupported PFM header in '" + path.string() + "'");
    DepthMap d(w, h);
    std::vector<float> row(static_cast<std::size_t>(w));
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw DataError("truncated PFM '" + path.string() + "'");
        for (int x = 0; x < w; ++x) d.set(x, y, row[static_cast<std::size_t>(x)]);
    }
    return d;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DataError("short write to '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Shortest round-trip representation of a double.
/// Shortest text that parses back to exactly `v`.
inline std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace snerf::io
