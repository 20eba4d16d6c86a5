// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/config.hpp"
#include "simplenerf/dataset.hpp"
#include "simplenerf/evaluation.hpp"
#include "simplenerf/scene.hpp"
#include "simplenerf/trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace snerf {

/// Synthetic dataset for `cfg.scene`, including its sparse keypoints.
inline Dataset make_synthetic(const SceneConfig& cfg) {
    Dataset data = generate_scene(cfg.spec(), cfg.seed);
    data.sparse = sample_sparse_depth(data, cfg.sparse, mix_seed(cfg.seed, 0x5A, 0));
    return data;
}

/// Train config with the dataset's depth bounds filled in.
inline TrainConfig bind_dataset(TrainConfig cfg, const Dataset& data) {
    cfg.render.near = data.near;
    cfg.render.far = data.far;
    return cfg;
}

/// Visibility masks of every test view from reference depths.
inline std::vector<Mask> test_visibility_masks(const Dataset& data, double factor) {
    std::vector<DepthView> train;
    for (int t : data.train) {
        const auto& v = data.views[static_cast<std::size_t>(t)];
        if (!v.depth) throw DataError("visibility masks need reference depth for train view " + std::to_string(t));
        train.push_back({&v.camera, &*v.depth});
    }
    std::vector<Mask> out;
    for (int t : data.test) {
        const auto& v = data.views[static_cast<std::size_t>(t)];
        if (!v.depth) throw DataError("visibility masks need reference depth for test view " + std::to_string(t));
        out.push_back(visibility_mask({&v.camera, &*v.depth}, train, factor));
    }
    return out;
}

struct Evaluation {
    EvalReport report;
    std::vector<RenderedView> renders;  // one per test view
    std::vector<Mask> masks;
    double coarse_fine_gap = 0.0;  // mean |z_c - z_f| over all test rays
};

inline ViewMetrics view_metrics(const std::string& name, const RenderedView& r, const CameraView& gt, const Mask& mask) {
    ViewMetrics m;
    m.view = name;
    m.coverage = mask.coverage();
    m.psnr = psnr(r.image, gt.image);
    m.ssim = ssim(r.image, gt.image);
    const bool any = m.coverage > 0.0;
    if (any) {
        m.masked_psnr = psnr(r.image, gt.image, &mask);
        m.masked_ssim = ssim(r.image, gt.image, &mask);
    }
    if (gt.depth) {
        Mask valid(gt.depth->width, gt.depth->height, false);
        Mask both = valid;
        for (std::size_t i = 0; i < valid.on.size(); ++i) {
            valid.on[i] = gt.depth->valid[i];
            both.on[i] = gt.depth->valid[i] && mask.on[i];
        }
        if (valid.coverage() > 0.0) {
            m.depth_mae = depth_mae(r.depth, *gt.depth, &valid, true);
            m.depth_srocc = srocc(r.depth, *gt.depth, &valid);
        }
        if (both.coverage() > 0.0) {
            m.masked_depth_mae = depth_mae(r.depth, *gt.depth, &both, true);
            m.masked_depth_srocc = srocc(r.depth, *gt.depth, &both);
        }
    }
    return m;
}

/// Renders every test view with the main model and scores it.
inline Evaluation evaluate_model(const TrainState& state, const Dataset& data, const RenderConfig& render,
                                 const EvalConfig& eval) {
    if (data.test.empty()) throw DataError("dataset '" + data.name + "' has no test views");
    Evaluation ev;
    ev.masks = test_visibility_masks(data, eval.visibility_factor);
    double gap = 0.0;
    std::size_t rays = 0;
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        const int t = data.test[i];
        const auto& view = data.views[static_cast<std::size_t>(t)];
        ev.renders.push_back(render_view(state, view.camera, render, mix_seed(eval.seed, static_cast<std::uint64_t>(t), 0)));
        const auto& r = ev.renders.back();
        for (std::size_t p = 0; p < r.depth.depth.size(); ++p) gap += std::abs(r.depth.depth[p] - r.coarse_depth.depth[p]);
        rays += r.depth.depth.size();
        ev.report.views.push_back(view_metrics(detail::view_stem(static_cast<std::size_t>(t)), r, view, ev.masks[i]));
    }
    ev.coarse_fine_gap = rays ? gap / static_cast<double>(rays) : 0.0;
    return ev;
}

/// Scores pre-rendered test views found in `dir`. Each view NNN is read from
/// NNN.png or images/NNN.png, with depth from NNN_depth.pfm or depth/NNN.pfm.
inline Evaluation evaluate_renders(const std::filesystem::path& dir, const Dataset& data, const EvalConfig& eval) {
    namespace fs = std::filesystem;
    if (data.test.empty()) throw DataError("dataset '" + data.name + "' has no test views");
    auto first = [&](const std::vector<fs::path>& options) -> std::optional<fs::path> {
        for (const auto& p : options)
            if (fs::exists(p)) return p;
        return std::nullopt;
    };
    Evaluation ev;
    ev.masks = test_visibility_masks(data, eval.visibility_factor);
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        const int t = data.test[i];
        const auto& view = data.views[static_cast<std::size_t>(t)];
        const std::string stem = detail::view_stem(static_cast<std::size_t>(t));
        const auto img = first({dir / (stem + ".png"), dir / "images" / (stem + ".png")});
        const auto dep = first({dir / (stem + "_depth.pfm"), dir / "depth" / (stem + ".pfm")});
        if (!img || !dep) throw DataError("'" + dir.string() + "' has no image and depth for test view " + stem);
        RenderedView r;
        r.image = io::read_png(*img);
        r.depth = io::read_pfm(*dep);
        if (r.image.width != view.image.width || r.image.height != view.image.height ||
            r.depth.width != view.image.width || r.depth.height != view.image.height)
            throw DataError("render of view " + stem + " in '" + dir.string() + "' has the wrong size");
        r.coarse_depth = r.depth;
        ev.report.views.push_back(view_metrics(stem, r, view, ev.masks[i]));
        ev.renders.push_back(std::move(r));
    }
    return ev;
}

}  // namespace snerf
