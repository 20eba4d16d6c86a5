// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Central finite-difference checks of every hand-written backward pass.

#include "simplenerf/encoding.hpp"
#include "simplenerf/field.hpp"
#include "simplenerf/losses.hpp"
#include "simplenerf/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace snerf {

using EncodeBackwardFn = void (*)(const double*, int, EncodingBand, const double*, double*);

struct GradCheckOptions {
    int hidden_layers = 2;
    int hidden_width = 16;
    double step = 1e-5;
    double tolerance = 1e-4;
    std::uint64_t seed = 0;
    EncodeBackwardFn encode_backward = &snerf::encode_backward;
};

struct SuiteResult {
    std::string name;
    double max_rel_error = 0.0;
    long checked = 0;
    bool passed = true;
};

struct GradCheckReport {
    std::vector<SuiteResult> suites;

    bool passed() const {
        return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed; });
    }

    double max_rel_error() const {
        double m = 0.0;
        for (const auto& s : suites) m = std::max(m, s.max_rel_error);
        return m;
    }

    std::string to_text() const {
        std::string out;
        char line[160];
        for (const auto& s : suites) {
            std::snprintf(line, sizeof line, "%-28s checked=%-6ld max_rel_err=%.3e  %s\n", s.name.c_str(), s.checked,
                          s.max_rel_error, s.passed ? "ok" : "FAIL");
            out += line;
        }
        return out;
    }
};

/// |a - f| / max(|a|, |f|, 1e-6).
inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

namespace detail {

class SuiteAccumulator {
public:
    SuiteAccumulator(std::string name, double tol) : tol_(tol) { r_.name = std::move(name); }

    void add(double analytic, double numeric) {
        const double e = relative_error(analytic, numeric);
        r_.max_rel_error = std::max(r_.max_rel_error, std::isfinite(e) ? e : INFINITY);
        ++r_.checked;
    }

    SuiteResult finish() {
        r_.passed = r_.checked > 0 && r_.max_rel_error < tol_;
        return r_;
    }

private:
    double tol_;
    SuiteResult r_;
};

/// Central difference of f with respect to *x.
inline double central(double& x, double h, const std::function<double()>& f) {
    const double x0 = x;
    x = x0 + h;
    const double fp = f();
    x = x0 - h;
    const double fm = f();
    x = x0;
    return (fp - fm) / (2.0 * h);
}

/// Reference forward of the loss terms. Stop-gradient operands are read from
/// `frozen`, so finite differences over `live` see them as constants.
inline double reference_term(const RayBatchOutputs& live, const RayBatchOutputs& frozen, int term, bool reliable) {
    const auto& rays = live.rays;
    const double n = static_cast<double>(rays.size());
    double total = 0.0;
    if (term == 0) {
        for (const auto& t : rays) {
            total += (t.c_c - t.gt).squaredNorm() + (t.c_f - t.gt).squaredNorm();
            if (live.has_ap) total += (t.c_ap - t.gt).squaredNorm();
            if (live.has_av) total += (t.c_av - t.gt).squaredNorm();
        }
        return total / n;
    }
    if (term == 1) {
        double count = 0.0;
        for (const auto& t : rays) {
            if (!t.z_sparse) continue;
            count += 1.0;
            total += std::pow(t.z_f - *t.z_sparse, 2);
            if (live.has_ap) total += std::pow(t.z_ap - *t.z_sparse, 2);
            if (live.has_av) total += std::pow(t.z_av - *t.z_sparse, 2);
        }
        return count > 0.0 ? total / count : 0.0;
    }
    if ((term == 2 && !live.has_ap) || (term == 3 && !live.has_av)) return 0.0;
    for (std::size_t i = 0; i < rays.size(); ++i) {
        const RayTerms& t = rays[i];
        const RayTerms& f = frozen.rays[i];
        const double z_aug = term == 2 ? t.z_ap : term == 3 ? t.z_av : t.z_f;
        const double z_aug_sg = term == 2 ? f.z_ap : term == 3 ? f.z_av : f.z_f;
        const int m = term == 2 ? t.m_ap : term == 3 ? t.m_av : t.m_cfc;
        if (!reliable) total += std::pow(t.z_c - z_aug, 2);
        else if (m == 1) total += std::pow(t.z_c - z_aug_sg, 2);
        else if (m == -1) total += std::pow(f.z_c - z_aug, 2);
    }
    return total / n;
}

inline RayBatchOutputs random_batch(Rng& rng, int n, bool has_ap, bool has_av) {
    RayBatchOutputs b;
    b.has_ap = has_ap;
    b.has_av = has_av;
    auto col = [&] { return Color(rng.uniform(), rng.uniform(), rng.uniform()); };
    for (int i = 0; i < n; ++i) {
        RayTerms t;
        t.gt = col();
        t.c_c = col();
        t.c_f = col();
        t.c_ap = col();
        t.c_av = col();
        t.z_c = rng.uniform(1, 5);
        t.z_f = rng.uniform(1, 5);
        t.z_ap = rng.uniform(1, 5);
        t.z_av = rng.uniform(1, 5);
        if (i % 2 == 0) t.z_sparse = rng.uniform(1, 5);
        t.m_ap = static_cast<int>(rng.index(3)) - 1;
        t.m_av = static_cast<int>(rng.index(3)) - 1;
        t.m_cfc = static_cast<int>(rng.index(3)) - 1;
        b.rays.push_back(t);
    }
    return b;
}

inline FieldConfig tiny_field(FieldVariant v, const GradCheckOptions& opt, bool low_freq) {
    FieldConfig c;
    c.variant = v;
    c.hidden_layers = opt.hidden_layers;
    c.hidden_width = opt.hidden_width;
    c.skip_layer = opt.hidden_layers >= 2 ? 1 : -1;
    if (low_freq) {
        c.l_p = 4;
        c.l_v = 2;
        c.l_p_ap = 2;
    }
    return c;
}

inline Eigen::Matrix3Xd random_units(Rng& rng, int n) {
    Eigen::Matrix3Xd v(3, n);
    for (int j = 0; j < n; ++j) {
        v.col(j) = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    }
    return v;
}

}  // namespace detail

/// Positional encoding: d(u . gamma(x))/dx.
inline SuiteResult check_encoding(const GradCheckOptions& opt) {
    detail::SuiteAccumulator acc("encoding", opt.tolerance);
    Rng rng(mix_seed(opt.seed, 1, 0));
    for (EncodingBand band : {EncodingBand{0, 4}, EncodingBand{0, 10}, EncodingBand{3, 10}}) {
        std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        std::vector<double> u(static_cast<std::size_t>(band.output_size(3)));
        for (double& v : u) v = rng.uniform(-1, 1);
        std::vector<double> g(3, 0.0);
        opt.encode_backward(x.data(), 3, band, u.data(), g.data());
        for (int i = 0; i < 3; ++i) {
            const double num = detail::central(x[static_cast<std::size_t>(i)], opt.step * 1e-1, [&] {
                const auto e = positional_encode(x, band);
                double s = 0.0;
                for (std::size_t k = 0; k < e.size(); ++k) s += u[k] * e[k];
                return s;
            });
            acc.add(g[static_cast<std::size_t>(i)], num);
        }
    }
    return acc.finish();
}

/// Field parameters (and, at reduced frequency, inputs) for one variant.
inline std::vector<SuiteResult> check_field(FieldVariant variant, const GradCheckOptions& opt) {
    std::vector<SuiteResult> out;
    const std::string name = "field/" + std::string(to_string(variant));
    for (bool inputs : {false, true}) {
        detail::SuiteAccumulator acc(name + (inputs ? ":inputs" : ":params"), opt.tolerance);
        Rng rng(mix_seed(opt.seed, 2, static_cast<std::uint64_t>(variant) * 2 + inputs));
        const FieldConfig cfg = detail::tiny_field(variant, opt, inputs);
        FieldParams p = init_params(cfg, mix_seed(opt.seed, 3, static_cast<std::uint64_t>(variant)));
        // Lift biases off zero so every ReLU sits away from its kink.
        for (auto& v : p.values) v += 0.05 * rng.uniform(-1, 1);
        const int n = 3;
        Eigen::Matrix3Xd pts(3, n);
        for (int j = 0; j < n; ++j) pts.col(j) = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        Eigen::Matrix3Xd views = detail::random_units(rng, n);
        Eigen::RowVectorXd a(n);
        Eigen::Matrix3Xd b(3, n);
        for (int j = 0; j < n; ++j) {
            a(j) = rng.uniform(-1, 1);
            b.col(j) = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        }
        auto loss = [&] {
            const auto o = eval_field_batch(p, cfg, pts, views);
            return (o.sigma.array() * a.array()).sum() + (o.color.array() * b.array()).sum();
        };
        const FieldGradients g = eval_field_with_grads(p, cfg, pts, views, a, b);
        if (!inputs) {
            for (Eigen::Index i = 0; i < p.values.size(); ++i)
                acc.add(g.params(i), detail::central(p.values(i), opt.step, loss));
        } else {
            for (int j = 0; j < n; ++j)
                for (int r = 0; r < 3; ++r) {
                    acc.add(g.points(r, j), detail::central(pts(r, j), opt.step, loss));
                    if (cfg.uses_views()) acc.add(g.views(r, j), detail::central(views(r, j), opt.step, loss));
                }
        }
        out.push_back(acc.finish());
    }
    return out;
}

/// Compositing: d(a.C + b D + c O) w.r.t. densities and colors.
inline SuiteResult check_composite(const GradCheckOptions& opt) {
    detail::SuiteAccumulator acc("renderer/composite", opt.tolerance);
    Rng rng(mix_seed(opt.seed, 4, 0));
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 8;
        SampleSet set = stratified_sample(1.0, 6.0, n, rng);
        std::vector<double> sig(n);
        for (double& s : sig) s = rng.uniform(0.0, 3.0);
        Eigen::Matrix3Xd col(3, n);
        for (int j = 0; j < n; ++j) col.col(j) = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
        const Color dc(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const double dd = rng.uniform(-1, 1), dop = rng.uniform(-1, 1);
        auto loss = [&] {
            const auto o = composite(compute_weights(sig, set), col, set);
            return dc.dot(o.color) + dd * o.depth + dop * o.opacity;
        };
        std::vector<double> d_sigma(n);
        Eigen::Matrix3Xd d_col(3, n);
        composite_backward(sig, col, set, compute_weights(sig, set), dc, dd, dop, d_sigma, d_col);
        for (int j = 0; j < n; ++j) {
            acc.add(d_sigma[static_cast<std::size_t>(j)], detail::central(sig[static_cast<std::size_t>(j)], opt.step, loss));
            for (int r = 0; r < 3; ++r) acc.add(d_col(r, j), detail::central(col(r, j), opt.step, loss));
        }
    }
    return acc.finish();
}

/// Field + compositing over whole rays: parameter gradients of color/depth.
inline SuiteResult check_render_pipeline(const GradCheckOptions& opt) {
    detail::SuiteAccumulator acc("renderer/pipeline", opt.tolerance);
    Rng rng(mix_seed(opt.seed, 5, 0));
    const FieldConfig cfg = detail::tiny_field(FieldVariant::main, opt, false);
    FieldParams p = init_params(cfg, mix_seed(opt.seed, 6, 0));
    for (auto& v : p.values) v += 0.05 * rng.uniform(-1, 1);
    // Positive density bias so the rays are partly opaque.
    p.bias(p.layout.f1.back())(0) += 1.0;
    std::vector<Ray> rays;
    std::vector<SampleSet> sets;
    for (int r = 0; r < 2; ++r) {
        rays.push_back(Ray{Vec3(0.1 * r, -0.1, -3.0), Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), 1.0).normalized()});
        sets.push_back(stratified_sample(1.0, 5.0, 6, rng));
    }
    std::vector<Color> dc = {Color(0.3, -0.7, 0.5), Color(-0.2, 0.4, 0.9)};
    std::vector<double> dz = {0.6, -0.4};
    auto loss = [&] {
        const FieldPass pass = render_pass({&p, &cfg}, rays, sets, false);
        double s = 0.0;
        for (std::size_t r = 0; r < rays.size(); ++r) s += dc[r].dot(pass.outputs[r].color) + dz[r] * pass.outputs[r].depth;
        return s;
    };
    const FieldPass pass = render_pass({&p, &cfg}, rays, sets, true);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.values.size());
    backward_pass({&p, &cfg}, pass, dc, dz, grad);
    for (Eigen::Index i = 0; i < p.values.size(); ++i) acc.add(grad(i), detail::central(p.values(i), opt.step, loss));
    return acc.finish();
}

/// Each loss term (and the weighted total) against an independent reference.
inline std::vector<SuiteResult> check_losses(const GradCheckOptions& opt) {
    std::vector<SuiteResult> out;
    static const char* names[] = {"losses/color", "losses/sparse_depth", "losses/points", "losses/views", "losses/cfc"};
    for (bool reliable : {true, false}) {
        for (int term = 0; term < 6; ++term) {
            if (!reliable && term < 2) continue;
            std::string name = term < 5 ? names[term] : "losses/total";
            if (!reliable) name += ":unmasked";
            detail::SuiteAccumulator acc(name, opt.tolerance);
            Rng rng(mix_seed(opt.seed, 7, static_cast<std::uint64_t>(term)));
            RayBatchOutputs live = detail::random_batch(rng, 6, true, true);
            const RayBatchOutputs frozen = live;
            LossWeights w;
            w.warmup_iters = 0;
            w.reliable_depth = reliable;
            std::function<double()> ref;
            std::vector<RayGrads> grads;
            if (term < 5) {
                ref = [&, term] { return detail::reference_term(live, frozen, term, reliable); };
                switch (term) {
                    case 0: grads = color_loss(live).grads; break;
                    case 1: grads = sparse_depth_loss(live).grads; break;
                    case 2: grads = depth_pair_loss(live, DepthPair::points, reliable).grads; break;
                    case 3: grads = depth_pair_loss(live, DepthPair::views, reliable).grads; break;
                    default: grads = depth_pair_loss(live, DepthPair::coarse_fine, reliable).grads; break;
                }
            } else {
                ref = [&] {
                    const double lam[] = {w.color, w.sparse_depth, w.points, w.views, w.cfc};
                    double s = 0.0;
                    for (int k = 0; k < 5; ++k) s += lam[k] * detail::reference_term(live, frozen, k, reliable);
                    return s;
                };
                grads = total_loss(live, w, 1).grads;
            }
            for (std::size_t i = 0; i < live.rays.size(); ++i) {
                RayTerms& t = live.rays[i];
                const RayGrads& g = grads[i];
                for (int c = 0; c < 3; ++c) {
                    acc.add(g.c_c(c), detail::central(t.c_c(c), opt.step, ref));
                    acc.add(g.c_f(c), detail::central(t.c_f(c), opt.step, ref));
                    acc.add(g.c_ap(c), detail::central(t.c_ap(c), opt.step, ref));
                    acc.add(g.c_av(c), detail::central(t.c_av(c), opt.step, ref));
                }
                acc.add(g.z_c, detail::central(t.z_c, opt.step, ref));
                acc.add(g.z_f, detail::central(t.z_f, opt.step, ref));
                acc.add(g.z_ap, detail::central(t.z_ap, opt.step, ref));
                acc.add(g.z_av, detail::central(t.z_av, opt.step, ref));
            }
            out.push_back(acc.finish());
        }
    }
    return out;
}

/// All suites at tiny sizes.
inline GradCheckReport run_grad_checks(const GradCheckOptions& opt = {}) {
    GradCheckReport rep;
    rep.suites.push_back(check_encoding(opt));
    for (FieldVariant v : {FieldVariant::main, FieldVariant::points_aug, FieldVariant::views_aug})
        for (auto& s : check_field(v, opt)) rep.suites.push_back(std::move(s));
    rep.suites.push_back(check_composite(opt));
    rep.suites.push_back(check_render_pipeline(opt));
    for (auto& s : check_losses(opt)) rep.suites.push_back(std::move(s));
    return rep;
}

/// Fault fixture: encode_backward with the cos-derivative sign flipped.
inline void encode_backward_cos_sign_bug(const double* x, int n, EncodingBand band, const double* upstream,
                                         double* grad_x) {
    for (int i = 0; i < n; ++i) {
        double g = *upstream++;
        sincos_ladder(x[i], band, [&](double freq, double s, double c) {
            g += freq * (upstream[0] * c + upstream[1] * s);
            upstream += 2;
        });
        grad_x[i] += g;
    }
}

}  // namespace snerf
