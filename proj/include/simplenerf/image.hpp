// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/common.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace snerf {

/// Row-major RGB image with channel values nominally in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;  // 3 * width * height, interleaved

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), rgb(static_cast<std::size_t>(3) * w * h, fill) {}

    std::size_t offset(int x, int y) const { return 3 * (static_cast<std::size_t>(y) * width + x); }

    Color at(int x, int y) const {
        const auto o = offset(x, y);
        return {rgb[o], rgb[o + 1], rgb[o + 2]};
    }

    void set(int x, int y, const Color& c) {
        const auto o = offset(x, y);
        rgb[o] = c[0];
        rgb[o + 1] = c[1];
        rgb[o + 2] = c[2];
    }

    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
};

/// Per-pixel along-ray distance with validity flags.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> depth;
    std::vector<std::uint8_t> valid;

    DepthMap() = default;
    DepthMap(int w, int h)
        : width(w), height(h), depth(static_cast<std::size_t>(w) * h, 0.0),
          valid(static_cast<std::size_t>(w) * h, 0) {}

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    double at(int x, int y) const { return depth[index(x, y)]; }
    bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }

    void set(int x, int y, double d) {
        depth[index(x, y)] = d;
        valid[index(x, y)] = (std::isfinite(d) && d > 0.0) ? 1 : 0;
    }

    double max_valid() const {
        double m = 0.0;
        for (std::size_t i = 0; i < depth.size(); ++i)
            if (valid[i]) m = std::max(m, depth[i]);
        return m;
    }
};

/// Binary per-pixel mask.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> on;

    Mask() = default;
    Mask(int w, int h, bool fill) : width(w), height(h), on(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

    bool at(int x, int y) const { return on[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { on[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

    double coverage() const {
        if (on.empty()) return 0.0;
        std::size_t n = 0;
        for (auto v : on) n += v ? 1 : 0;
        return static_cast<double>(n) / static_cast<double>(on.size());
    }
};

namespace detail {

// Resolves one axis of a bilinear lookup. Pixel i covers [i, i+1) with its
// center at i + 0.5.
inline bool bilinear_axis(double coord, int size, int& i0, double& frac) {
    const double u = coord - 0.5;
    if (!(u >= 0.0) || u > static_cast<double>(size - 1)) return false;
    if (size == 1) {
        i0 = 0;
        frac = 0.0;
        return true;
    }
    i0 = std::min(static_cast<int>(std::floor(u)), size - 2);
    frac = u - i0;
    return true;
}

}  // namespace detail

/// Bilinear interpolation between the four pixel centers surrounding `xy`.
/// Returns nullopt when any needed neighbor lies outside the image.
inline std::optional<Color> bilinear_sample(const Image& image, const Vec2& xy) {
    int x0 = 0, y0 = 0;
    double fx = 0.0, fy = 0.0;
    if (!detail::bilinear_axis(xy.x(), image.width, x0, fx)) return std::nullopt;
    if (!detail::bilinear_axis(xy.y(), image.height, y0, fy)) return std::nullopt;
    const int x1 = std::min(x0 + 1, image.width - 1);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const Color top = (1.0 - fx) * image.at(x0, y0) + fx * image.at(x1, y0);
    const Color bottom = (1.0 - fx) * image.at(x0, y1) + fx * image.at(x1, y1);
    return Color((1.0 - fy) * top + fy * bottom);
}

inline double mean_intensity(const Color& c) { return (c[0] + c[1] + c[2]) / 3.0; }

}  // namespace snerf
