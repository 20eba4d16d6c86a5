// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/camera.hpp"
#include "simplenerf/common.hpp"
#include "simplenerf/image.hpp"
#include "simplenerf/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace snerf {

namespace detail {

inline void check_same_shape(const Image& a, const Image& b) {
    require(a.width == b.width && a.height == b.height, "metric: image shapes differ");
}

inline void check_mask(const Mask* mask, int w, int h) {
    if (mask) require(mask->width == w && mask->height == h, "metric: mask shape differs");
}

}  // namespace detail

/// 10 log10(1 / MSE) over masked pixels and channels; +inf when MSE is zero.
inline double psnr(const Image& pred, const Image& gt, const Mask* mask = nullptr) {
    detail::check_same_shape(pred, gt);
    detail::check_mask(mask, gt.width, gt.height);
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if (mask && !mask->at(x, y)) continue;
            sum += (pred.at(x, y) - gt.at(x, y)).squaredNorm();
            n += 3;
        }
    require(n > 0, "psnr: empty mask");
    const double mse = sum / static_cast<double>(n);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double range = 1.0;
};

/// Single-scale SSIM on the channel-mean grayscale image, Gaussian window,
/// averaged over window centers whose window lies inside the image (and whose
/// center pixel is masked in, when a mask is given).
inline double ssim(const Image& pred, const Image& gt, const Mask* mask = nullptr, const SsimParams& prm = {}) {
    detail::check_same_shape(pred, gt);
    detail::check_mask(mask, gt.width, gt.height);
    const int w = gt.width, h = gt.height, win = prm.window, r = win / 2;
    require(w >= win && h >= win, "ssim: image smaller than the window");

    std::vector<double> kernel(static_cast<std::size_t>(win));
    double ksum = 0.0;
    for (int i = 0; i < win; ++i) {
        const double d = i - r;
        kernel[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * prm.sigma * prm.sigma));
        ksum += kernel[static_cast<std::size_t>(i)];
    }
    for (double& k : kernel) k /= ksum;

    auto gray = [](const Image& img) {
        std::vector<double> g(static_cast<std::size_t>(img.width) * img.height);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) g[static_cast<std::size_t>(y) * img.width + x] = mean_intensity(img.at(x, y));
        return g;
    };
    const auto a = gray(pred), b = gray(gt);
    const double c1 = std::pow(prm.k1 * prm.range, 2), c2 = std::pow(prm.k2 * prm.range, 2);

    double total = 0.0;
    std::size_t count = 0;
    for (int cy = r; cy < h - r; ++cy)
        for (int cx = r; cx < w - r; ++cx) {
            if (mask && !mask->at(cx, cy)) continue;
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const double wgt = kernel[static_cast<std::size_t>(dy + r)] * kernel[static_cast<std::size_t>(dx + r)];
                    const auto i = static_cast<std::size_t>(cy + dy) * w + (cx + dx);
                    ma += wgt * a[i];
                    mb += wgt * b[i];
                    saa += wgt * a[i] * a[i];
                    sbb += wgt * b[i] * b[i];
                    sab += wgt * a[i] * b[i];
                }
            const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    require(count > 0, "ssim: no window centers inside the mask");
    return total / static_cast<double>(count);
}

inline double median(std::vector<double> v) {
    require(!v.empty(), "median of an empty set");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    if (v.size() % 2 == 1) return v[mid];
    const double hi = v[mid];
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

/// Mean absolute depth error over masked pixels with valid ground truth. With
/// `normalize`, both maps are divided by the median ground-truth depth first.
inline double depth_mae(const DepthMap& pred, const DepthMap& gt, const Mask* mask, bool normalize) {
    require(pred.width == gt.width && pred.height == gt.height, "depth_mae: shapes differ");
    detail::check_mask(mask, gt.width, gt.height);
    std::vector<double> p, g;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if ((mask && !mask->at(x, y)) || !gt.is_valid(x, y)) continue;
            p.push_back(pred.at(x, y));
            g.push_back(gt.at(x, y));
        }
    require(!g.empty(), "depth_mae: empty mask");
    double scale = 1.0;
    if (normalize) {
        const double med = median(g);
        require(med > 0.0, "depth_mae: non-positive median depth");
        scale = 1.0 / med;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) sum += std::abs(p[i] * scale - g[i] * scale);
    return sum / static_cast<double>(g.size());
}

/// 1-based ranks; tied values share their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

/// Spearman correlation: Pearson correlation of average ranks. nullopt when
/// either input is constant.
inline std::optional<double> srocc(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "srocc: length mismatch");
    require(a.size() >= 2, "srocc: need at least two values");
    const auto ra = average_ranks(a), rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

inline std::optional<double> srocc(const DepthMap& pred, const DepthMap& gt, const Mask* mask = nullptr) {
    require(pred.width == gt.width && pred.height == gt.height, "srocc: shapes differ");
    detail::check_mask(mask, gt.width, gt.height);
    std::vector<double> p, g;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if ((mask && !mask->at(x, y)) || !gt.is_valid(x, y)) continue;
            p.push_back(pred.at(x, y));
            g.push_back(gt.at(x, y));
        }
    return srocc(p, g);
}

/// A camera with a reference depth map (ground truth or a dense model's depth).
struct DepthView {
    const Camera* camera = nullptr;
    const DepthMap* depth = nullptr;
};

/// Forward-splats `src` depth into `dst`: nearest destination pixel, smallest
/// along-ray distance wins. Unhit pixels stay invalid.
inline DepthMap splat_depth(const DepthView& src, const Camera& dst) {
    DepthMap out(dst.intrinsics.width, dst.intrinsics.height);
    for (int y = 0; y < src.depth->height; ++y)
        for (int x = 0; x < src.depth->width; ++x) {
            if (!src.depth->is_valid(x, y)) continue;
            const auto proj = reproject(Vec2(x + 0.5, y + 0.5), src.depth->at(x, y), *src.camera, dst);
            if (!proj || !in_bounds(dst.intrinsics, proj->pixel)) continue;
            const int px = static_cast<int>(std::floor(proj->pixel.x()));
            const int py = static_cast<int>(std::floor(proj->pixel.y()));
            if (!out.is_valid(px, py) || proj->distance < out.at(px, py)) out.set(px, py, proj->distance);
        }
    return out;
}

/// Test pixels seen by at least two train views: a train view sees a pixel
/// when its warped depth agrees with the test depth to within
/// `threshold_factor` times that train view's maximum depth.
inline Mask visibility_mask(const DepthView& test, std::span<const DepthView> train, double threshold_factor = 0.05) {
    require(train.size() >= 2, "visibility_mask: need at least two train views");
    require(threshold_factor >= 0.0, "visibility_mask: negative threshold");
    const int w = test.depth->width, h = test.depth->height;
    std::vector<int> votes(static_cast<std::size_t>(w) * h, 0);
    for (const auto& tv : train) {
        const DepthMap warped = splat_depth(tv, *test.camera);
        const double threshold = threshold_factor * tv.depth->max_valid();
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!warped.is_valid(x, y) || !test.depth->is_valid(x, y)) continue;
                if (std::abs(warped.at(x, y) - test.depth->at(x, y)) < threshold)
                    ++votes[static_cast<std::size_t>(y) * w + x];
            }
    }
    Mask mask(w, h, false);
    for (std::size_t i = 0; i < votes.size(); ++i) mask.on[i] = votes[i] >= 2 ? 1 : 0;
    return mask;
}

struct ViewMetrics {
    std::string view;
    double psnr = 0.0, ssim = 0.0, depth_mae = 0.0;
    std::optional<double> depth_srocc;
    double masked_psnr = 0.0, masked_ssim = 0.0, masked_depth_mae = 0.0;
    std::optional<double> masked_depth_srocc;
    double coverage = 0.0;
};

struct EvalReport {
    std::vector<ViewMetrics> views;

    ViewMetrics aggregate() const {
        ViewMetrics a;
        a.view = "aggregate";
        if (views.empty()) return a;
        const double n = static_cast<double>(views.size());
        double sr = 0, msr = 0;
        std::size_t nsr = 0, nmsr = 0;
        for (const auto& v : views) {
            a.psnr += v.psnr;
            a.ssim += v.ssim;
            a.depth_mae += v.depth_mae;
            a.masked_psnr += v.masked_psnr;
            a.masked_ssim += v.masked_ssim;
            a.masked_depth_mae += v.masked_depth_mae;
            a.coverage += v.coverage;
            if (v.depth_srocc) { sr += *v.depth_srocc; ++nsr; }
            if (v.masked_depth_srocc) { msr += *v.masked_depth_srocc; ++nmsr; }
        }
        for (double* f : {&a.psnr, &a.ssim, &a.depth_mae, &a.masked_psnr, &a.masked_ssim, &a.masked_depth_mae, &a.coverage})
            *f /= n;
        if (nsr) a.depth_srocc = sr / static_cast<double>(nsr);
        if (nmsr) a.masked_depth_srocc = msr / static_cast<double>(nmsr);
        return a;
    }

    std::string to_csv() const {
        auto num = [](double v) { return std::isinf(v) ? std::string(v > 0 ? "inf" : "-inf") : io::fmt_double(v); };
        auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string("none"); };
        std::string s =
            "view,psnr,ssim,depth_mae,depth_srocc,masked_psnr,masked_ssim,masked_depth_mae,masked_depth_srocc,coverage\n";
        auto row = [&](const ViewMetrics& v) {
            s += v.view + "," + num(v.psnr) + "," + num(v.ssim) + "," + num(v.depth_mae) + "," + opt(v.depth_srocc) +
                 "," + num(v.masked_psnr) + "," + num(v.masked_ssim) + "," + num(v.masked_depth_mae) + "," +
                 opt(v.masked_depth_srocc) + "," + num(v.coverage) + "\n";
        };
        for (const auto& v : views) row(v);
        row(aggregate());
        return s;
    }

    std::string summary() const {
        const auto a = aggregate();
        char buf[512];
        std::snprintf(buf, sizeof(buf),
                      "test views: %zu\n"
                      "unmasked: PSNR %.3f dB  SSIM %.4f  depth MAE %.4f  SROCC %s\n"
                      "masked:   PSNR %.3f dB  SSIM %.4f  depth MAE %.4f  SROCC %s\n"
                      "mask coverage: %.3f\n",
                      views.size(), a.psnr, a.ssim, a.depth_mae,
                      a.depth_srocc ? std::to_string(*a.depth_srocc).c_str() : "none", a.masked_psnr, a.masked_ssim,
                      a.masked_depth_mae, a.masked_depth_srocc ? std::to_string(*a.masked_depth_srocc).c_str() : "none",
                      a.coverage);
        return buf;
    }
};

}  // namespace snerf
