// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/camera.hpp"
#include "simplenerf/common.hpp"
#include "simplenerf/field.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace snerf {

struct RenderConfig {
    double near = 1.0;
    double far = 6.0;
    int n_coarse = 32;
    int n_fine = 64;
    double epsilon = 1e-5;  // added to coarse weights before the inverse CDF

    void validate() const {
        require(near > 0.0 && near < far, "render: require 0 < near < far");
        require(n_coarse >= 2, "render: at least two coarse samples");
        require(n_fine >= 0, "render: negative fine sample count");
        require(epsilon >= 0.0, "render: negative epsilon");
    }
};

/// Ascending along-ray distances inside [near, far].
struct SampleSet {
    std::vector<double> s;
    double near = 0.0;
    double far = 0.0;

    std::size_t size() const { return s.size(); }

    /// delta_i = s_{i+1} - s_i; the last sample gets one nominal bin (far - near) / N.
    double gap(std::size_t i) const {
        return i + 1 < s.size() ? s[i + 1] - s[i] : (far - near) / static_cast<double>(s.size());
    }
};

struct RenderOutput {
    Color color = Color::Zero();
    double depth = 0.0;  // sum w_i s_i, not renormalized by opacity
    double opacity = 0.0;
    std::vector<double> weights;
};

/// One uniform draw per equal-width bin of [near, far].
inline SampleSet stratified_sample(double near, double far, int n, Rng& rng) {
    require(near > 0.0 && near < far, "stratified_sample: require 0 < near < far");
    require(n >= 2, "stratified_sample: need at least two samples");
    SampleSet set{std::vector<double>(static_cast<std::size_t>(n)), near, far};
    const double width = (far - near) / n;
    for (int i = 0; i < n; ++i) set.s[static_cast<std::size_t>(i)] = near + width * (i + rng.uniform());
    return set;
}

/// w_i = exp(-sum_{j<i} delta_j sigma_j) * (1 - exp(-delta_i sigma_i)).
inline std::vector<double> compute_weights(std::span<const double> sigmas, const SampleSet& samples) {
    require(sigmas.size() == samples.size(), "compute_weights: one density per sample");
    std::vector<double> w(sigmas.size());
    double optical = 0.0;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        require(sigmas[i] >= 0.0, "compute_weights: negative density");
        const double tau = samples.gap(i) * sigmas[i];
        w[i] = std::exp(-optical) * -std::expm1(-tau);
        optical += tau;
    }
    return w;
}

inline RenderOutput composite(std::span<const double> weights, const Eigen::Matrix3Xd& colors,
                              const SampleSet& samples) {
    require(weights.size() == samples.size() && colors.cols() == static_cast<Eigen::Index>(samples.size()),
            "composite: length mismatch");
    RenderOutput out;
    out.weights.assign(weights.begin(), weights.end());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.color += weights[i] * colors.col(static_cast<Eigen::Index>(i));
        out.depth += weights[i] * samples.s[i];
        out.opacity += weights[i];
    }
    return out;
}

/// Gradients of (color, depth, opacity) compositing w.r.t. per-sample
/// densities and colors. Writes into d_sigma / d_colors (overwrites).
inline void composite_backward(std::span<const double> sigmas, const Eigen::Matrix3Xd& colors,
                               const SampleSet& samples, std::span<const double> weights, const Color& d_color,
                               double d_depth, double d_opacity, std::span<double> d_sigma,
                               Eigen::Ref<Eigen::Matrix3Xd> d_colors) {
    const std::size_t n = samples.size();
    require(sigmas.size() == n && weights.size() == n && d_sigma.size() == n &&
                d_colors.cols() == static_cast<Eigen::Index>(n),
            "composite_backward: length mismatch");
    // dL/dw_i
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ci = static_cast<Eigen::Index>(i);
        g[i] = d_color.dot(colors.col(ci)) + d_depth * samples.s[i] + d_opacity;
        d_colors.col(ci) = weights[i] * d_color;
    }
    // dw_k/dsigma_k = delta_k T_{k+1}; dw_i/dsigma_k = -delta_k w_i for i > k.
    double suffix = 0.0;
    double optical = 0.0;
    std::vector<double> t_next(n);
    for (std::size_t i = 0; i < n; ++i) {
        optical += samples.gap(i) * sigmas[i];
        t_next[i] = std::exp(-optical);
    }
    for (std::size_t k = n; k-- > 0;) {
        d_sigma[k] = samples.gap(k) * (g[k] * t_next[k] - suffix);
        suffix += g[k] * weights[k];
    }
}

/// Inverse-CDF draws from the piecewise-constant density proportional to
/// (w_i + epsilon) over the coarse bins, merged with the coarse samples.
/// Bin i spans the midpoints around coarse sample i, clipped to [near, far].
inline SampleSet hierarchical_sample(std::span<const double> weights, const SampleSet& coarse, int n_fine, Rng& rng,
                                     double epsilon = 1e-5) {
    require(n_fine >= 1, "hierarchical_sample: need at least one fine sample");
    const std::size_t n = coarse.size();
    require(weights.size() == n && n >= 1, "hierarchical_sample: one weight per coarse sample");
    std::vector<double> edges(n + 1);
    edges[0] = coarse.near;
    edges[n] = coarse.far;
    for (std::size_t i = 1; i < n; ++i) edges[i] = 0.5 * (coarse.s[i - 1] + coarse.s[i]);

    std::vector<double> cdf(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + std::max(weights[i], 0.0) + epsilon;
    const double total = cdf[n];
    if (total <= 0.0) {
        for (std::size_t i = 0; i <= n; ++i) cdf[i] = static_cast<double>(i) / static_cast<double>(n);
    } else {
        for (double& c : cdf) c /= total;
    }
    cdf[n] = 1.0;

    SampleSet out{coarse.s, coarse.near, coarse.far};
    out.s.reserve(n + static_cast<std::size_t>(n_fine));
    for (int k = 0; k < n_fine; ++k) {
        const double u = rng.uniform();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        std::size_t bin = static_cast<std::size_t>(std::distance(cdf.begin(), it)) - 1;
        bin = std::min(bin, n - 1);
        const double mass = cdf[bin + 1] - cdf[bin];
        const double frac = mass > 0.0 ? std::clamp((u - cdf[bin]) / mass, 0.0, 1.0) : 0.5;
        out.s.push_back(edges[bin] + frac * (edges[bin + 1] - edges[bin]));
    }
    std::sort(out.s.begin(), out.s.end());
    return out;
}

/// Non-owning handle to a field and its configuration.
struct FieldRef {
    const FieldParams* params = nullptr;
    const FieldConfig* config = nullptr;
};

/// One field evaluated over every sample of a batch of rays.
struct FieldPass {
    std::vector<SampleSet> samples;
    std::vector<Eigen::Index> offsets;  // first column of each ray in the batch matrices
    FieldTape tape;
    FieldBatchOutput field;
    std::vector<RenderOutput> outputs;
};

inline FieldPass render_pass(FieldRef f, std::span<const Ray> rays, std::vector<SampleSet> samples,
                             bool keep_tape) {
    require(rays.size() == samples.size(), "render_pass: one sample set per ray");
    FieldPass pass;
    pass.samples = std::move(samples);
    Eigen::Index total = 0;
    for (const auto& s : pass.samples) {
        pass.offsets.push_back(total);
        total += static_cast<Eigen::Index>(s.size());
    }
    Eigen::Matrix3Xd points(3, total);
    Eigen::Matrix3Xd views(3, total);
    for (std::size_t r = 0; r < rays.size(); ++r) {
        const auto& set = pass.samples[r];
        for (std::size_t i = 0; i < set.size(); ++i) {
            const Eigen::Index c = pass.offsets[r] + static_cast<Eigen::Index>(i);
            points.col(c) = rays[r].at(set.s[i]);
            views.col(c) = rays[r].direction;
        }
    }
    pass.field = eval_field_batch(*f.params, *f.config, points, views, keep_tape ? &pass.tape : nullptr);
    pass.outputs.resize(rays.size());
    for (std::size_t r = 0; r < rays.size(); ++r) {
        const auto& set = pass.samples[r];
        const auto len = static_cast<Eigen::Index>(set.size());
        const Eigen::RowVectorXd sig = pass.field.sigma.segment(pass.offsets[r], len);
        const auto w = compute_weights(std::span<const double>(sig.data(), set.size()), set);
        pass.outputs[r] = composite(w, pass.field.color.middleCols(pass.offsets[r], len), set);
    }
    return pass;
}

/// Back-propagates per-ray (color, depth) gradients through compositing and
/// the field, accumulating into `grad`.
inline void backward_pass(FieldRef f, const FieldPass& pass, std::span<const Color> d_color,
                          std::span<const double> d_depth, Eigen::VectorXd& grad) {
    require(d_color.size() == pass.outputs.size() && d_depth.size() == pass.outputs.size(),
            "backward_pass: one gradient per ray");
    const Eigen::Index total = pass.field.sigma.cols();
    Eigen::RowVectorXd d_sigma = Eigen::RowVectorXd::Zero(total);
    Eigen::Matrix3Xd d_colors = Eigen::Matrix3Xd::Zero(3, total);
    for (std::size_t r = 0; r < pass.outputs.size(); ++r) {
        if (d_color[r].isZero(0.0) && d_depth[r] == 0.0) continue;
        const auto& set = pass.samples[r];
        const auto len = static_cast<Eigen::Index>(set.size());
        const Eigen::RowVectorXd sig = pass.field.sigma.segment(pass.offsets[r], len);
        composite_backward(std::span<const double>(sig.data(), set.size()),
                           pass.field.color.middleCols(pass.offsets[r], len), set, pass.outputs[r].weights,
                           d_color[r], d_depth[r], 0.0,
                           std::span<double>(d_sigma.data() + pass.offsets[r], set.size()),
                           d_colors.middleCols(pass.offsets[r], len));
    }
    field_backward(*f.params, *f.config, pass.tape, pass.field, d_sigma, d_colors, grad);
}

/// Coarse pass on stratified samples; when `fine` is given, a fine pass on the
/// union of coarse and inverse-CDF samples.
inline std::pair<RenderOutput, std::optional<RenderOutput>> render_ray(const Ray& ray, FieldRef coarse,
                                                                        std::optional<FieldRef> fine,
                                                                        const RenderConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<SampleSet> coarse_set{stratified_sample(cfg.near, cfg.far, cfg.n_coarse, rng)};
    const std::span<const Ray> rays(&ray, 1);
    FieldPass c = render_pass(coarse, rays, coarse_set, false);
    if (!fine) return {std::move(c.outputs[0]), std::nullopt};
    std::vector<SampleSet> fine_set;
    if (cfg.n_fine > 0)
        fine_set.push_back(hierarchical_sample(c.outputs[0].weights, c.samples[0], cfg.n_fine, rng, cfg.epsilon));
    else
        fine_set.push_back(c.samples[0]);
    FieldPass f = render_pass(*fine, rays, std::move(fine_set), false);
    return {std::move(c.outputs[0]), std::move(f.outputs[0])};
}

}  // namespace snerf
