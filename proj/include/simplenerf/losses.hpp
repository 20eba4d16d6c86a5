// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/common.hpp"

#include <cstdint>
#include <optional>
#include <vector>

// Training losses. Every term is reduced by the mean over the rays it applies
// to. Depth terms act on along-ray expected depths.

namespace snerf {

struct LossWeights {
    double color = 1.0;         // lambda_1
    double sparse_depth = 0.1;  // lambda_2
    double points = 0.1;        // lambda_3
    double views = 0.1;         // lambda_4
    double cfc = 0.1;           // lambda_5
    long warmup_iters = 10000;
    // When false, the masked depth terms supervise every ray in both
    // directions without stop-gradients (the "w/o reliable depth" ablation).
    bool reliable_depth = true;

    void validate() const {
        require(color > 0.0, "loss: color weight must be positive");
        require(sparse_depth >= 0.0 && points >= 0.0 && views >= 0.0 && cfc >= 0.0,
                "loss: weights must be non-negative");
        require(warmup_iters >= 0, "loss: negative warmup");
    }
};

/// Everything the losses read for one ray. Colors: c (main coarse), f (main
/// fine), ap/av (augmented coarse). Mask verdicts are in {-1, 0, +1}.
struct RayTerms {
    Color gt = Color::Zero();
    Color c_c = Color::Zero(), c_f = Color::Zero(), c_ap = Color::Zero(), c_av = Color::Zero();
    double z_c = 0.0, z_f = 0.0, z_ap = 0.0, z_av = 0.0;
    std::optional<double> z_sparse;
    std::int8_t m_ap = 0, m_av = 0, m_cfc = 0;
};

struct RayBatchOutputs {
    std::vector<RayTerms> rays;
    bool has_ap = true;  // points-augmented model present in this run
    bool has_av = true;  // views-augmented model present in this run
};

struct RayGrads {
    Color c_c = Color::Zero(), c_f = Color::Zero(), c_ap = Color::Zero(), c_av = Color::Zero();
    double z_c = 0.0, z_f = 0.0, z_ap = 0.0, z_av = 0.0;
};

struct LossResult {
    double value = 0.0;
    std::vector<RayGrads> grads;
};

/// Value and partials of one depth-pair term.
struct PairLoss {
    double value = 0.0;
    double d_main = 0.0;
    double d_aug = 0.0;
};

/// +1: ||z_main - sg(z_aug)||^2; -1: ||sg(z_main) - z_aug||^2; 0: nothing.
inline PairLoss masked_depth_loss(double z_main, double z_aug, int verdict) {
    require(verdict >= -1 && verdict <= 1, "masked_depth_loss: verdict must be -1, 0 or +1");
    const double diff = z_main - z_aug;
    if (verdict == 1) return {diff * diff, 2.0 * diff, 0.0};
    if (verdict == -1) return {diff * diff, 0.0, -2.0 * diff};
    return {};
}

/// ||z_main - z_aug||^2 with gradient to both operands.
inline PairLoss unmasked_depth_loss(double z_main, double z_aug) {
    const double diff = z_main - z_aug;
    return {diff * diff, 2.0 * diff, -2.0 * diff};
}

/// +1: ||z_c - sg(z_f)||^2; -1: ||sg(z_c) - z_f||^2; 0: nothing.
inline PairLoss coarse_fine_consistency_loss(double z_c, double z_f, int verdict) {
    return masked_depth_loss(z_c, z_f, verdict);
}

inline LossResult color_loss(const RayBatchOutputs& batch) {
    LossResult r;
    r.grads.resize(batch.rays.size());
    if (batch.rays.empty()) return r;
    const double inv = 1.0 / static_cast<double>(batch.rays.size());
    for (std::size_t i = 0; i < batch.rays.size(); ++i) {
        const RayTerms& t = batch.rays[i];
        RayGrads& g = r.grads[i];
        auto term = [&](const Color& c, Color& grad) {
            const Color diff = c - t.gt;
            r.value += diff.squaredNorm() * inv;
            grad = 2.0 * inv * diff;
        };
        term(t.c_c, g.c_c);
        term(t.c_f, g.c_f);
        if (batch.has_ap) term(t.c_ap, g.c_ap);
        if (batch.has_av) term(t.c_av, g.c_av);
    }
    return r;
}

/// Sparse-depth loss on the fine and augmented models. The main coarse depth
/// is deliberately excluded.
inline LossResult sparse_depth_loss(const RayBatchOutputs& batch) {
    LossResult r;
    r.grads.resize(batch.rays.size());
    std::size_t count = 0;
    for (const auto& t : batch.rays) count += t.z_sparse.has_value() ? 1 : 0;
    if (count == 0) return r;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < batch.rays.size(); ++i) {
        const RayTerms& t = batch.rays[i];
        if (!t.z_sparse) continue;
        RayGrads& g = r.grads[i];
        auto term = [&](double z, double& grad) {
            const double diff = z - *t.z_sparse;
            r.value += diff * diff * inv;
            grad = 2.0 * inv * diff;
        };
        term(t.z_f, g.z_f);
        if (batch.has_ap) term(t.z_ap, g.z_ap);
        if (batch.has_av) term(t.z_av, g.z_av);
    }
    return r;
}

enum class DepthPair { points, views, coarse_fine };

/// Mean over rays of the masked (or, when `reliable` is false, unmasked)
/// depth term for one model pair.
inline LossResult depth_pair_loss(const RayBatchOutputs& batch, DepthPair pair, bool reliable = true) {
    LossResult r;
    r.grads.resize(batch.rays.size());
    if (batch.rays.empty()) return r;
    if (pair == DepthPair::points && !batch.has_ap) return r;
    if (pair == DepthPair::views && !batch.has_av) return r;
    const double inv = 1.0 / static_cast<double>(batch.rays.size());
    for (std::size_t i = 0; i < batch.rays.size(); ++i) {
        const RayTerms& t = batch.rays[i];
        RayGrads& g = r.grads[i];
        double z_other = 0.0;
        int verdict = 0;
        double* d_other = nullptr;
        switch (pair) {
            case DepthPair::points: z_other = t.z_ap; verdict = t.m_ap; d_other = &g.z_ap; break;
            case DepthPair::views: z_other = t.z_av; verdict = t.m_av; d_other = &g.z_av; break;
            case DepthPair::coarse_fine: z_other = t.z_f; verdict = t.m_cfc; d_other = &g.z_f; break;
        }
        const PairLoss l = reliable ? masked_depth_loss(t.z_c, z_other, verdict) : unmasked_depth_loss(t.z_c, z_other);
        r.value += l.value * inv;
        g.z_c = l.d_main * inv;
        *d_other = l.d_aug * inv;
    }
    return r;
}

struct LossBreakdown {
    double color = 0.0, sparse_depth = 0.0, points = 0.0, views = 0.0, cfc = 0.0;  // unweighted
    double w_color = 0.0, w_sparse_depth = 0.0, w_points = 0.0, w_views = 0.0, w_cfc = 0.0;
    double total = 0.0;
    bool regularized = false;  // past warmup
};

struct TotalLoss {
    LossBreakdown breakdown;
    std::vector<RayGrads> grads;
};

inline bool regularizers_active(const LossWeights& w, long iteration) { return iteration >= w.warmup_iters; }

/// lambda_1 L_color + lambda_2 L_sd, plus lambda_3 L_ap + lambda_4 L_av +
/// lambda_5 L_cfc once `iteration` reaches the warmup length.
inline TotalLoss total_loss(const RayBatchOutputs& batch, const LossWeights& w, long iteration) {
    require(iteration >= 0, "total_loss: negative iteration");
    TotalLoss out;
    out.grads.resize(batch.rays.size());
    LossBreakdown& b = out.breakdown;

    auto accumulate = [&](const LossResult& r, double lambda) {
        for (std::size_t i = 0; i < r.grads.size(); ++i) {
            RayGrads& g = out.grads[i];
            const RayGrads& s = r.grads[i];
            g.c_c += lambda * s.c_c;
            g.c_f += lambda * s.c_f;
            g.c_ap += lambda * s.c_ap;
            g.c_av += lambda * s.c_av;
            g.z_c += lambda * s.z_c;
            g.z_f += lambda * s.z_f;
            g.z_ap += lambda * s.z_ap;
            g.z_av += lambda * s.z_av;
        }
    };

    const LossResult lc = color_loss(batch);
    b.color = lc.value;
    b.w_color = w.color * lc.value;
    accumulate(lc, w.color);

    if (w.sparse_depth > 0.0) {
        const LossResult ls = sparse_depth_loss(batch);
        b.sparse_depth = ls.value;
        b.w_sparse_depth = w.sparse_depth * ls.value;
        accumulate(ls, w.sparse_depth);
    }

    b.regularized = regularizers_active(w, iteration);
    if (b.regularized) {
        auto pair_term = [&](DepthPair pair, double lambda, double& raw, double& weighted) {
            if (lambda <= 0.0) return;
            const LossResult l = depth_pair_loss(batch, pair, w.reliable_depth);
            raw = l.value;
            weighted = lambda * l.value;
            accumulate(l, lambda);
        };
        pair_term(DepthPair::points, w.points, b.points, b.w_points);
        pair_term(DepthPair::views, w.views, b.views, b.w_views);
        pair_term(DepthPair::coarse_fine, w.cfc, b.cfc, b.w_cfc);
    }
    b.total = b.w_color + b.w_sparse_depth + b.w_points + b.w_views + b.w_cfc;
    return out;
}

}  // namespace snerf
