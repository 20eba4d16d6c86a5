// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/camera.hpp"
#include "simplenerf/common.hpp"
#include "simplenerf/image.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>

namespace snerf {

struct ReliabilityConfig {
    int k = 5;           // odd patch side
    double e_tau = 0.1;  // MSE threshold

    void validate() const {
        require(k >= 1 && k % 2 == 1, "reliability: patch side must be odd and positive");
        require(e_tau > 0.0, "reliability: threshold must be positive");
    }
};

/// +1: the alternative depth supervises the main one; -1: the reverse; 0: neither.
struct MaskVerdict {
    std::int8_t value = 0;
    double e_main = std::numeric_limits<double>::infinity();
    double e_alt = std::numeric_limits<double>::infinity();
};

/// A calibrated training image used as the source or target of a patch warp.
struct PatchView {
    const Camera* camera = nullptr;
    const Image* image = nullptr;
};

/// Index of the other view whose camera center is closest; ties go to the lower index.
inline std::size_t nearest_train_view(std::size_t index, std::span<const Pose> poses) {
    require(poses.size() >= 2, "nearest_train_view: need at least two views");
    require(index < poses.size(), "nearest_train_view: index out of range");
    std::size_t best = index;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poses.size(); ++i) {
        if (i == index) continue;
        const double d = (poses[i].center() - poses[index].center()).norm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

/// Warps the k x k patch around integer pixel (qx, qy) of `src` into `dst`
/// with every patch pixel placed at along-ray distance `z` on its own ray, and
/// returns the mean squared intensity difference over valid pixels and RGB
/// channels. nullopt when more than half of the patch cannot be compared.
inline std::optional<double> patch_reprojection_error(int qx, int qy, double z, const PatchView& src,
                                                      const PatchView& dst, const ReliabilityConfig& cfg) {
    require(z > 0.0, "patch_reprojection_error: depth must be positive");
    require(src.image->contains(qx, qy), "patch_reprojection_error: pixel outside the source image");
    const int r = cfg.k / 2;
    int valid = 0;
    double sum = 0.0;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const int x = qx + dx;
            const int y = qy + dy;
            if (!src.image->contains(x, y)) continue;
            const auto proj = reproject(Vec2(x + 0.5, y + 0.5), z, *src.camera, *dst.camera);
            if (!proj) continue;
            const auto sampled = bilinear_sample(*dst.image, proj->pixel);
            if (!sampled) continue;
            sum += (*sampled - src.image->at(x, y)).squaredNorm();
            ++valid;
        }
    }
    if (2 * valid < cfg.k * cfg.k || valid == 0) return std::nullopt;
    return sum / (3.0 * valid);
}

/// Ternary verdict: +1 if e_alt <= e_main and e_alt <= e_tau; -1 if
/// e_main < e_alt and e_main <= e_tau; else 0. nullopt errors count as +inf.
inline MaskVerdict reliability_mask(std::optional<double> e_main, std::optional<double> e_alt, double e_tau) {
    require(e_tau > 0.0, "reliability_mask: threshold must be positive");
    constexpr double inf = std::numeric_limits<double>::infinity();
    MaskVerdict v;
    v.e_main = e_main.value_or(inf);
    v.e_alt = e_alt.value_or(inf);
    if (v.e_alt <= v.e_main && v.e_alt <= e_tau)
        v.value = 1;
    else if (v.e_main < v.e_alt && v.e_main <= e_tau)
        v.value = -1;
    else
        v.value = 0;
    return v;
}

}  // namespace snerf
