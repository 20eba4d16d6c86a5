// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "simplenerf/gradcheck.hpp"
#include "simplenerf/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace snerf {
namespace {

RayBatchOutputs make_batch(std::uint64_t seed, int n = 12) {
    Rng rng(seed);
    return detail::random_batch(rng, n, true, true);
}

RayTerms exact_ray() {
    RayTerms t;
    t.gt = Color(0.2, 0.4, 0.6);
    t.c_c = t.c_f = t.c_ap = t.c_av = t.gt;
    t.z_c = t.z_f = t.z_ap = t.z_av = 2.0;
    return t;
}

// Term-by-term scalar oracle written against the loss definitions.
struct Oracle {
    double color = 0, sd = 0, ap = 0, av = 0, cfc = 0;
};

Oracle oracle(const RayBatchOutputs& b) {
    Oracle o;
    const double n = static_cast<double>(b.rays.size());
    int keypoints = 0;
    for (const auto& t : b.rays) {
        for (const Color* c : {&t.c_c, &t.c_f, &t.c_ap, &t.c_av})
            for (int k = 0; k < 3; ++k) o.color += std::pow((*c)[k] - t.gt[k], 2) / n;
        if (t.z_sparse) {
            ++keypoints;
            for (double z : {t.z_f, t.z_ap, t.z_av}) o.sd += std::pow(z - *t.z_sparse, 2);
        }
        if (t.m_ap != 0) o.ap += std::pow(t.z_c - t.z_ap, 2) / n;
        if (t.m_av != 0) o.av += std::pow(t.z_c - t.z_av, 2) / n;
        if (t.m_cfc != 0) o.cfc += std::pow(t.z_c - t.z_f, 2) / n;
    }
    if (keypoints) o.sd /= keypoints;
    return o;
}

TEST(ColorLoss, ExactPredictionsGiveZero) {
    RayBatchOutputs b;
    b.rays = {exact_ray(), exact_ray()};
    EXPECT_EQ(color_loss(b).value, 0.0);
}

TEST(ColorLoss, SingleOffsetTerm) {
    RayBatchOutputs b;
    b.rays = {exact_ray()};
    b.rays[0].c_c += Color(0.1, 0, 0);
    const auto r = color_loss(b);
    EXPECT_NEAR(r.value, 0.01, 1e-15);
    EXPECT_NEAR(r.grads[0].c_c[0], 0.2, 1e-15);
    EXPECT_EQ(r.grads[0].c_f, Color::Zero());
}

TEST(ColorLoss, MatchesOracle) {
    const auto b = make_batch(1);
    EXPECT_NEAR(color_loss(b).value, oracle(b).color, 1e-12);
}

TEST(SparseDepthLoss, NoKeypointsGivesZero) {
    RayBatchOutputs b;
    b.rays = {exact_ray()};
    b.rays[0].z_f = 5.0;
    EXPECT_EQ(sparse_depth_loss(b).value, 0.0);
}

TEST(SparseDepthLoss, Example) {
    RayBatchOutputs b;
    RayTerms t = exact_ray();
    t.z_sparse = 2.0;
    t.z_ap = 2.1;
    t.z_c = 7.0;
    b.rays = {t};
    const auto r = sparse_depth_loss(b);
    EXPECT_NEAR(r.value, 0.01, 1e-12);
    EXPECT_EQ(r.grads[0].z_c, 0.0);
}

TEST(SparseDepthLoss, MeanOverKeypointRaysOnly) {
    const auto b = make_batch(2);
    const auto r = sparse_depth_loss(b);
    EXPECT_NEAR(r.value, oracle(b).sd, 1e-12);
    for (const auto& g : r.grads) EXPECT_EQ(g.z_c, 0.0);
}

TEST(MaskedDepthLoss, Examples) {
    const auto z = masked_depth_loss(1.5, 1.0, 0);
    EXPECT_EQ(z.value, 0.0);
    EXPECT_EQ(z.d_main, 0.0);
    EXPECT_EQ(z.d_aug, 0.0);

    const auto p = masked_depth_loss(1.5, 1.0, 1);
    EXPECT_DOUBLE_EQ(p.value, 0.25);
    EXPECT_DOUBLE_EQ(p.d_main, 1.0);
    EXPECT_EQ(p.d_aug, 0.0);

    const auto m = masked_depth_loss(1.5, 1.0, -1);
    EXPECT_DOUBLE_EQ(m.value, 0.25);
    EXPECT_EQ(m.d_main, 0.0);
    EXPECT_DOUBLE_EQ(m.d_aug, -1.0);

    EXPECT_THROW(masked_depth_loss(1.0, 1.0, 2), std::invalid_argument);
}

TEST(CoarseFineConsistency, Examples) {
    for (int v : {-1, 0, 1}) EXPECT_EQ(coarse_fine_consistency_loss(2.0, 2.0, v).value, 0.0);
    const auto p = coarse_fine_consistency_loss(2.5, 2.0, 1);
    EXPECT_NE(p.d_main, 0.0);
    EXPECT_EQ(p.d_aug, 0.0);
    const auto b = make_batch(3);
    EXPECT_NEAR(depth_pair_loss(b, DepthPair::coarse_fine).value, oracle(b).cfc, 1e-12);
}

TEST(StopGradient, WrappedOperandHasZeroGradient) {
    const auto b = make_batch(4, 64);
    for (DepthPair pair : {DepthPair::points, DepthPair::views, DepthPair::coarse_fine}) {
        const auto r = depth_pair_loss(b, pair);
        for (std::size_t i = 0; i < b.rays.size(); ++i) {
            const RayTerms& t = b.rays[i];
            const RayGrads& g = r.grads[i];
            const int m = pair == DepthPair::points ? t.m_ap : pair == DepthPair::views ? t.m_av : t.m_cfc;
            const double other = pair == DepthPair::points ? g.z_ap : pair == DepthPair::views ? g.z_av : g.z_f;
            if (m == 1) {
                EXPECT_EQ(other, 0.0);
            } else if (m == -1) {
                EXPECT_EQ(g.z_c, 0.0);
            } else {
                EXPECT_TRUE(g.z_c == 0.0 && other == 0.0);
            }
        }
    }
}

TEST(StopGradient, UnmaskedVariantReachesBothOperands) {
    const auto r = unmasked_depth_loss(3.0, 2.0);
    EXPECT_DOUBLE_EQ(r.value, 1.0);
    EXPECT_DOUBLE_EQ(r.d_main, 2.0);
    EXPECT_DOUBLE_EQ(r.d_aug, -2.0);
}

TEST(TotalLoss, WarmupSilencesRegularizers) {
    const auto b = make_batch(5);
    LossWeights w;
    w.warmup_iters = 100;
    const auto before = total_loss(b, w, 99);
    EXPECT_FALSE(before.breakdown.regularized);
    EXPECT_EQ(before.breakdown.w_points + before.breakdown.w_views + before.breakdown.w_cfc, 0.0);
    LossWeights plain = w;
    plain.points = plain.views = plain.cfc = 0.0;
    const auto reference = total_loss(b, plain, 99);
    EXPECT_EQ(before.breakdown.total, reference.breakdown.total);
    for (std::size_t i = 0; i < b.rays.size(); ++i) {
        EXPECT_EQ(before.grads[i].z_c, reference.grads[i].z_c);
        EXPECT_EQ(before.grads[i].z_ap, reference.grads[i].z_ap);
    }
    EXPECT_TRUE(total_loss(b, w, 100).breakdown.regularized);
}

TEST(TotalLoss, ColorOnlyLimit) {
    const auto b = make_batch(6);
    LossWeights w;
    w.sparse_depth = w.points = w.views = w.cfc = 0.0;
    w.warmup_iters = 0;
    const auto t = total_loss(b, w, 10);
    EXPECT_NEAR(t.breakdown.total, oracle(b).color, 1e-12);
    for (const auto& g : t.grads) {
        EXPECT_EQ(g.z_c, 0.0);
        EXPECT_EQ(g.z_f, 0.0);
    }
}

TEST(TotalLoss, WeightedSumOfTerms) {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const auto b = make_batch(seed);
        LossWeights w;
        w.warmup_iters = 5;
        const Oracle o = oracle(b);
        const auto t = total_loss(b, w, 6);
        EXPECT_NEAR(t.breakdown.total, o.color + 0.1 * (o.sd + o.ap + o.av + o.cfc), 1e-12);
        EXPECT_NEAR(t.breakdown.points, o.ap, 1e-12);
        EXPECT_NEAR(t.breakdown.w_views, 0.1 * o.av, 1e-12);
    }
}

TEST(TotalLoss, NonNegative) {
    for (std::uint64_t seed = 20; seed < 60; ++seed) {
        const auto t = total_loss(make_batch(seed), LossWeights{}, 20000).breakdown;
        for (double v : {t.color, t.sparse_depth, t.points, t.views, t.cfc, t.total}) EXPECT_GE(v, 0.0);
    }
}

TEST(TotalLoss, MissingAugmentedModelsDropTheirTerms) {
    auto b = make_batch(7);
    b.has_ap = false;
    b.has_av = false;
    LossWeights w;
    w.warmup_iters = 0;
    const auto t = total_loss(b, w, 1);
    EXPECT_EQ(t.breakdown.points, 0.0);
    EXPECT_EQ(t.breakdown.views, 0.0);
    for (const auto& g : t.grads) {
        EXPECT_EQ(g.c_ap, Color::Zero());
        EXPECT_EQ(g.z_av, 0.0);
    }
}

TEST(TotalLoss, RejectsNegativeIteration) {
    EXPECT_THROW(total_loss(make_batch(8), LossWeights{}, -1), std::invalid_argument);
}

TEST(LossGradients, MatchFiniteDifferences) {
    GradCheckOptions opt;
    for (const auto& r : check_losses(opt)) EXPECT_TRUE(r.passed) << r.name << " " << r.max_rel_error;
}

}  // namespace
}  // namespace snerf
