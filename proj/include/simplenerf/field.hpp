// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/common.hpp"
#include "simplenerf/encoding.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Radiance-field MLPs with hand-written reverse mode.
//
// F1 is a ReLU stack over the encoded point followed by a linear output layer.
// For the main and points-augmented variants the output layer yields
// [sigma_raw, h]; F2 maps [h, extra encodings] through one ReLU layer of width
// hidden_width / 2 to three color logits. The views-augmented variant has no
// F2: its F1 output layer yields [sigma_raw, color logits] directly.

namespace snerf {

enum class FieldVariant { main, points_aug, views_aug };

inline std::string_view to_string(FieldVariant v) {
    switch (v) {
        case FieldVariant::main: return "main";
        case FieldVariant::points_aug: return "points_aug";
        case FieldVariant::views_aug: return "views_aug";
    }
    return "?";
}

inline FieldVariant parse_variant(std::string_view s) {
    if (s == "main") return FieldVariant::main;
    if (s == "points_aug") return FieldVariant::points_aug;
    if (s == "views_aug") return FieldVariant::views_aug;
    throw ConfigError("unknown field variant '" + std::string(s) + "'");
}

struct FieldConfig {
    FieldVariant variant = FieldVariant::main;
    int hidden_layers = 4;
    int hidden_width = 64;
    int skip_layer = -1;  // hidden layer whose input is re-concatenated with the encoding; -1 = none
    int l_p = 10;
    int l_v = 4;
    int l_p_ap = 3;

    void validate() const {
        require(hidden_layers >= 1, "field: at least one hidden layer is required");
        require(hidden_width >= 2, "field: hidden width must be at least 2");
        require(skip_layer == -1 || (skip_layer >= 1 && skip_layer < hidden_layers),
                "field: skip layer must index a hidden layer after the first");
        require(l_p >= 0 && l_v >= 0, "field: encoding frequencies must be non-negative");
        require(variant != FieldVariant::points_aug || (l_p_ap >= 0 && l_p_ap <= l_p),
                "field: points augmentation needs 0 <= l_p_ap <= l_p");
    }

    bool has_f2() const { return variant != FieldVariant::views_aug; }

    EncodingBand point_band() const {
        return variant == FieldVariant::points_aug ? EncodingBand{0, l_p_ap} : EncodingBand{0, l_p};
    }
    EncodingBand residual_band() const { return {l_p_ap, l_p}; }
    EncodingBand view_band() const { return {0, l_v}; }

    int point_dim() const { return point_band().output_size(3); }
    int extra_dim() const {
        switch (variant) {
            case FieldVariant::main: return view_band().output_size(3);
            case FieldVariant::points_aug: return residual_band().output_size(3) + view_band().output_size(3);
            case FieldVariant::views_aug: return 0;
        }
        return 0;
    }
    int color_width() const { return std::max(1, hidden_width / 2); }
    bool uses_views() const { return variant != FieldVariant::views_aug; }
};

struct LayerShape {
    int rows = 0;  // fan-out
    int cols = 0;  // fan-in
    std::size_t offset = 0;

    std::size_t size() const { return static_cast<std::size_t>(rows) * cols + rows; }
};

/// Where each layer's weights and bias live inside the flat parameter vector.
struct FieldLayout {
    std::vector<LayerShape> f1;
    std::vector<LayerShape> f2;
    std::size_t size = 0;

    static FieldLayout of(const FieldConfig& cfg) {
        cfg.validate();
        FieldLayout layout;
        auto add = [&layout](std::vector<LayerShape>& dst, int rows, int cols) {
            dst.push_back({rows, cols, layout.size});
            layout.size += dst.back().size();
        };
        const int w = cfg.hidden_width;
        for (int l = 0; l < cfg.hidden_layers; ++l) {
            int in = l == 0 ? cfg.point_dim() : w;
            if (l == cfg.skip_layer) in += cfg.point_dim();
            add(layout.f1, w, in);
        }
        if (cfg.has_f2()) {
            add(layout.f1, 1 + w, w);
            add(layout.f2, cfg.color_width(), w + cfg.extra_dim());
            add(layout.f2, 3, cfg.color_width());
        } else {
            add(layout.f1, 4, w);
        }
        return layout;
    }
};

struct FieldParams {
    FieldLayout layout;
    Eigen::VectorXd values;
    std::uint64_t seed = 0;

    Eigen::Map<const Eigen::MatrixXd> weight(const LayerShape& s) const {
        return {values.data() + s.offset, s.rows, s.cols};
    }
    Eigen::Map<Eigen::MatrixXd> weight(const LayerShape& s) {
        return {values.data() + s.offset, s.rows, s.cols};
    }
    Eigen::Map<const Eigen::VectorXd> bias(const LayerShape& s) const {
        return {values.data() + s.offset + static_cast<std::size_t>(s.rows) * s.cols, s.rows};
    }
    Eigen::Map<Eigen::VectorXd> bias(const LayerShape& s) {
        return {values.data() + s.offset + static_cast<std::size_t>(s.rows) * s.cols, s.rows};
    }
};

/// Glorot-uniform weights, zero biases; deterministic in `seed`.
inline FieldParams init_params(const FieldConfig& cfg, std::uint64_t seed) {
    FieldParams p;
    p.layout = FieldLayout::of(cfg);
    p.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.layout.size));
    p.seed = seed;
    Rng rng(seed);
    auto fill = [&](const std::vector<LayerShape>& layers) {
        for (const auto& s : layers) {
            const double a = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
            auto w = p.weight(s);
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-a, a);
        }
    };
    fill(p.layout.f1);
    fill(p.layout.f2);
    return p;
}

/// Outputs for a batch of n samples (one column per sample).
struct FieldBatchOutput {
    Eigen::RowVectorXd sigma_raw;
    Eigen::RowVectorXd sigma;
    Eigen::Matrix3Xd color;
    Eigen::MatrixXd feature;  // h; empty for the views-augmented variant
};

/// Per-sample result of eval_field.
struct FieldOutput {
    double sigma_raw = 0.0;
    double sigma = 0.0;
    Eigen::VectorXd feature;
    Color color = Color::Zero();
};

/// Intermediate activations kept by the forward pass for backprop.
struct FieldTape {
    Eigen::Matrix3Xd points;
    Eigen::Matrix3Xd views;
    Eigen::MatrixXd encoded;                // F1 input encoding
    Eigen::MatrixXd extra;                  // F2 extra inputs
    std::vector<Eigen::MatrixXd> f1_in, f1_pre;
    std::vector<Eigen::MatrixXd> f2_in, f2_pre;
};

namespace detail {

inline void encode_columns(const Eigen::Matrix3Xd& x, EncodingBand band, Eigen::MatrixXd& out, Eigen::Index row0) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) encode_into(x.col(j).data(), 3, band, &out(row0, j));
}

inline void encode_columns_backward(const Eigen::Matrix3Xd& x, EncodingBand band, const Eigen::MatrixXd& upstream,
                                    Eigen::Index row0, Eigen::Matrix3Xd& grad) {
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        encode_backward(x.col(j).data(), 3, band, &upstream(row0, j), grad.col(j).data());
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void dense_forward(const FieldParams& p, const LayerShape& s, const Eigen::MatrixXd& in, Eigen::MatrixXd& pre) {
    pre.noalias() = p.weight(s) * in;
    pre.colwise() += p.bias(s);
}

inline void dense_backward(const FieldParams& p, const LayerShape& s, const Eigen::MatrixXd& in,
                           const Eigen::MatrixXd& d_pre, Eigen::VectorXd& grad, Eigen::MatrixXd* d_in) {
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + s.offset, s.rows, s.cols);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + s.offset + static_cast<std::size_t>(s.rows) * s.cols, s.rows);
    gw.noalias() += d_pre * in.transpose();
    gb += d_pre.rowwise().sum();
    if (d_in) d_in->noalias() = p.weight(s).transpose() * d_pre;
}

}  // namespace detail

/// Forward pass over n samples. `views` may be empty for the views-augmented
/// variant; it is ignored there. When `tape` is non-null it receives what
/// field_backward needs.
inline FieldBatchOutput eval_field_batch(const FieldParams& params, const FieldConfig& cfg,
                                         const Eigen::Matrix3Xd& points, const Eigen::Matrix3Xd& views,
                                         FieldTape* tape = nullptr) {
    const Eigen::Index n = points.cols();
    if (cfg.uses_views())
        require(views.cols() == n, "eval_field: one view direction per point is required");

    FieldTape local;
    FieldTape& t = tape ? *tape : local;
    t.points = points;
    if (cfg.uses_views()) t.views = views;
    t.encoded.resize(cfg.point_dim(), n);
    detail::encode_columns(points, cfg.point_band(), t.encoded, 0);

    const auto& f1 = params.layout.f1;
    const int hidden = cfg.hidden_layers;
    t.f1_in.resize(f1.size());
    t.f1_pre.resize(f1.size());
    for (int l = 0; l < hidden; ++l) {
        Eigen::MatrixXd& in = t.f1_in[static_cast<std::size_t>(l)];
        if (l == 0) {
            in = t.encoded;
        } else {
            const Eigen::MatrixXd prev = t.f1_pre[static_cast<std::size_t>(l - 1)].cwiseMax(0.0);
            if (l == cfg.skip_layer) {
                in.resize(prev.rows() + t.encoded.rows(), n);
                in.topRows(prev.rows()) = prev;
                in.bottomRows(t.encoded.rows()) = t.encoded;
            } else {
                in = prev;
            }
        }
        detail::dense_forward(params, f1[static_cast<std::size_t>(l)], in, t.f1_pre[static_cast<std::size_t>(l)]);
    }
    const auto out_idx = static_cast<std::size_t>(hidden);
    t.f1_in[out_idx] = t.f1_pre[out_idx - 1].cwiseMax(0.0);
    detail::dense_forward(params, f1[out_idx], t.f1_in[out_idx], t.f1_pre[out_idx]);
    const Eigen::MatrixXd& head = t.f1_pre[out_idx];

    FieldBatchOutput out;
    out.sigma_raw = head.row(0);
    out.sigma = out.sigma_raw.cwiseMax(0.0);

    Eigen::MatrixXd logits;
    if (!cfg.has_f2()) {
        logits = head.bottomRows(3);
    } else {
        const int w = cfg.hidden_width;
        out.feature = head.bottomRows(w);
        t.extra.resize(cfg.extra_dim(), n);
        Eigen::Index row = 0;
        if (cfg.variant == FieldVariant::points_aug) {
            detail::encode_columns(points, cfg.residual_band(), t.extra, row);
            row += cfg.residual_band().output_size(3);
        }
        detail::encode_columns(views, cfg.view_band(), t.extra, row);

        const auto& f2 = params.layout.f2;
        t.f2_in.resize(2);
        t.f2_pre.resize(2);
        t.f2_in[0].resize(w + cfg.extra_dim(), n);
        t.f2_in[0].topRows(w) = out.feature;
        t.f2_in[0].bottomRows(cfg.extra_dim()) = t.extra;
        detail::dense_forward(params, f2[0], t.f2_in[0], t.f2_pre[0]);
        t.f2_in[1] = t.f2_pre[0].cwiseMax(0.0);
        detail::dense_forward(params, f2[1], t.f2_in[1], t.f2_pre[1]);
        logits = t.f2_pre[1];
    }
    out.color = logits.unaryExpr([](double v) { return detail::sigmoid(v); });
    return out;
}

/// Reverse pass for a batch evaluated with `tape`. Accumulates parameter
/// gradients into `grad` (same layout as params.values). Input gradients are
/// written when the corresponding pointer is non-null.
inline void field_backward(const FieldParams& params, const FieldConfig& cfg, const FieldTape& t,
                           const FieldBatchOutput& out, const Eigen::RowVectorXd& d_sigma,
                           const Eigen::Matrix3Xd& d_color, Eigen::VectorXd& grad,
                           Eigen::Matrix3Xd* d_points = nullptr, Eigen::Matrix3Xd* d_views = nullptr) {
    const Eigen::Index n = t.points.cols();
    require(d_sigma.cols() == n && d_color.cols() == n, "field_backward: upstream gradient shape mismatch");
    require(grad.size() == params.values.size(), "field_backward: gradient buffer has the wrong size");

    const Eigen::RowVectorXd d_sigma_raw =
        (out.sigma_raw.array() > 0.0).select(d_sigma.array(), 0.0).matrix();
    const Eigen::MatrixXd d_logits = (d_color.array() * out.color.array() * (1.0 - out.color.array())).matrix();

    const auto& f1 = params.layout.f1;
    const int hidden = cfg.hidden_layers;
    const auto out_idx = static_cast<std::size_t>(hidden);
    Eigen::MatrixXd d_head(f1[out_idx].rows, n);
    d_head.row(0) = d_sigma_raw;

    if (d_points) *d_points = Eigen::Matrix3Xd::Zero(3, n);
    if (d_views) *d_views = Eigen::Matrix3Xd::Zero(3, n);

    if (!cfg.has_f2()) {
        d_head.bottomRows(3) = d_logits;
    } else {
        const auto& f2 = params.layout.f2;
        const int w = cfg.hidden_width;
        Eigen::MatrixXd d_in1;
        detail::dense_backward(params, f2[1], t.f2_in[1], d_logits, grad, &d_in1);
        const Eigen::MatrixXd d_pre0 = (t.f2_pre[0].array() > 0.0).select(d_in1.array(), 0.0).matrix();
        Eigen::MatrixXd d_in0;
        detail::dense_backward(params, f2[0], t.f2_in[0], d_pre0, grad, &d_in0);
        d_head.bottomRows(w) = d_in0.topRows(w);
        const Eigen::MatrixXd d_extra = d_in0.bottomRows(cfg.extra_dim());
        Eigen::Index row = 0;
        if (cfg.variant == FieldVariant::points_aug) {
            if (d_points) detail::encode_columns_backward(t.points, cfg.residual_band(), d_extra, row, *d_points);
            row += cfg.residual_band().output_size(3);
        }
        if (d_views) detail::encode_columns_backward(t.views, cfg.view_band(), d_extra, row, *d_views);
    }

    Eigen::MatrixXd d_encoded;
    if (d_points) d_encoded = Eigen::MatrixXd::Zero(cfg.point_dim(), n);

    Eigen::MatrixXd d_act;
    detail::dense_backward(params, f1[out_idx], t.f1_in[out_idx], d_head, grad, &d_act);
    for (int l = hidden - 1; l >= 0; --l) {
        const auto li = static_cast<std::size_t>(l);
        const Eigen::MatrixXd d_pre = (t.f1_pre[li].array() > 0.0).select(d_act.array(), 0.0).matrix();
        const bool need_input = l > 0 || d_points != nullptr;
        Eigen::MatrixXd d_in;
        detail::dense_backward(params, f1[li], t.f1_in[li], d_pre, grad, need_input ? &d_in : nullptr);
        if (l == 0) {
            if (d_points) d_encoded += d_in;
        } else if (l == cfg.skip_layer) {
            const Eigen::Index prev_rows = d_in.rows() - cfg.point_dim();
            if (d_points) d_encoded += d_in.bottomRows(cfg.point_dim());
            d_act = d_in.topRows(prev_rows);
        } else {
            d_act = std::move(d_in);
        }
    }
    if (d_points) detail::encode_columns_backward(t.points, cfg.point_band(), d_encoded, 0, *d_points);
}

/// Single-sample evaluation. `view` must be a unit vector unless the variant
/// ignores view directions.
inline FieldOutput eval_field(const FieldParams& params, const FieldConfig& cfg, const Vec3& point,
                              const std::optional<Vec3>& view) {
    Eigen::Matrix3Xd v(3, 0);
    if (cfg.uses_views()) {
        require(view.has_value(), "eval_field: view direction required for this variant");
        require(std::abs(view->norm() - 1.0) <= 1e-6, "eval_field: view direction must be a unit vector");
        v = *view;
    }
    Eigen::Matrix3Xd p = point;
    const auto batch = eval_field_batch(params, cfg, p, v);
    FieldOutput o;
    o.sigma_raw = batch.sigma_raw(0);
    o.sigma = batch.sigma(0);
    o.color = batch.color.col(0);
    if (batch.feature.size() > 0) o.feature = batch.feature.col(0);
    return o;
}

struct FieldGradients {
    FieldBatchOutput output;
    Eigen::VectorXd params;
    Eigen::Matrix3Xd points;
    Eigen::Matrix3Xd views;
};

/// Forward + reverse pass in one call: the differentiable-evaluation contract.
inline FieldGradients eval_field_with_grads(const FieldParams& params, const FieldConfig& cfg,
                                            const Eigen::Matrix3Xd& points, const Eigen::Matrix3Xd& views,
                                            const Eigen::RowVectorXd& d_sigma, const Eigen::Matrix3Xd& d_color) {
    require(d_sigma.cols() == points.cols() && d_color.cols() == points.cols(),
            "eval_field_with_grads: upstream gradient shape mismatch");
    FieldTape tape;
    FieldGradients g;
    g.output = eval_field_batch(params, cfg, points, views, &tape);
    g.params = Eigen::VectorXd::Zero(params.values.size());
    field_backward(params, cfg, tape, g.output, d_sigma, d_color, g.params, &g.points,
                   cfg.uses_views() ? &g.views : nullptr);
    if (!cfg.uses_views()) g.views = Eigen::Matrix3Xd::Zero(3, points.cols());
    return g;
}

}  // namespace snerf
