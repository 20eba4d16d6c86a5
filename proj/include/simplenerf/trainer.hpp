// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/camera.hpp"
#include "simplenerf/common.hpp"
#include "simplenerf/dataset.hpp"
#include "simplenerf/field.hpp"
#include "simplenerf/io.hpp"
#include "simplenerf/losses.hpp"
#include "simplenerf/reliability.hpp"
#include "simplenerf/renderer.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace snerf {

struct TrainConfig {
    long iterations = 20000;
    int batch_rays = 64;
    double lr_init = 5e-4;
    double lr_final = 5e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double warmup_fraction = 0.1;
    std::uint64_t seed = 0;
    RenderConfig render;
    ReliabilityConfig reliability;
    LossWeights loss;
    FieldConfig main_field;
    FieldConfig points_field{FieldVariant::points_aug};
    FieldConfig views_field{FieldVariant::views_aug};

    long warmup_iters() const { return std::lround(warmup_fraction * static_cast<double>(iterations)); }

    void validate() const {
        require(iterations >= 0, "train: negative iteration count");
        require(batch_rays >= 1, "train: batch needs at least one ray");
        require(lr_final > 0.0 && lr_final < lr_init, "train: require 0 < lr_final < lr_init");
        require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, "train: warmup fraction must lie in [0, 1)");
        require(iterations == 0 || iterations > warmup_iters(), "train: iterations must exceed warmup");
        render.validate();
        reliability.validate();
        loss.validate();
        main_field.validate();
        points_field.validate();
        views_field.validate();
    }

    /// Canonical text of every field; hashed into checkpoints.
    std::string canonical() const {
        std::ostringstream s;
        auto field = [&](const char* name, const FieldConfig& f) {
            s << name << ":" << to_string(f.variant) << "," << f.hidden_layers << "," << f.hidden_width << ","
              << f.skip_layer << "," << f.l_p << "," << f.l_v << "," << f.l_p_ap << ";";
        };
        s << "it=" << iterations << ";b=" << batch_rays << ";lr=" << io::fmt_double(lr_init) << ","
          << io::fmt_double(lr_final) << ";adam=" << io::fmt_double(beta1) << "," << io::fmt_double(beta2) << ","
          << io::fmt_double(adam_eps) << ";warm=" << io::fmt_double(warmup_fraction) << ";seed=" << seed
          << ";render=" << io::fmt_double(render.near) << "," << io::fmt_double(render.far) << "," << render.n_coarse
          << "," << render.n_fine << "," << io::fmt_double(render.epsilon) << ";rel=" << reliability.k << ","
          << io::fmt_double(reliability.e_tau) << ";loss=" << io::fmt_double(loss.color) << ","
          << io::fmt_double(loss.sparse_depth) << "," << io::fmt_double(loss.points) << "," << io::fmt_double(loss.views)
          << "," << io::fmt_double(loss.cfc) << "," << loss.reliable_depth << ";";
        field("main", main_field);
        field("points", points_field);
        field("views", views_field);
        return s.str();
    }

    std::uint64_t digest() const { return fnv1a64(canonical()); }
};

/// lr_init * (lr_final / lr_init)^(iteration / iterations).
inline double lr_at(long iteration, const TrainConfig& cfg) {
    require(iteration >= 0 && iteration <= std::max(cfg.iterations, 0L), "lr_at: iteration outside the schedule");
    if (cfg.iterations == 0) return cfg.lr_init;
    const double t = static_cast<double>(iteration) / static_cast<double>(cfg.iterations);
    return cfg.lr_init * std::pow(cfg.lr_final / cfg.lr_init, t);
}

/// Bias-corrected Adam step on a flat parameter vector; `step` counts from 1.
inline void adam_update(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad, Eigen::VectorXd& m,
                        Eigen::VectorXd& v, long step, double lr, double beta1, double beta2, double eps) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    params.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

enum class Slot : int { coarse = 0, fine = 1, points = 2, views = 3 };

inline const char* slot_name(Slot s) {
    switch (s) {
        case Slot::coarse: return "main_coarse";
        case Slot::fine: return "main_fine";
        case Slot::points: return "points_aug";
        case Slot::views: return "views_aug";
    }
    return "?";
}

struct Model {
    FieldConfig config;
    FieldParams params;
    Eigen::VectorXd m;  // Adam first moment
    Eigen::VectorXd v;  // Adam second moment

    FieldRef ref() const { return {&params, &config}; }
};

/// Everything a checkpoint holds.
struct TrainState {
    long iteration = 0;
    long adam_step = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_digest = 0;
    std::array<std::optional<Model>, 4> models;

    Model& model(Slot s) { return *models[static_cast<std::size_t>(s)]; }
    const Model& model(Slot s) const { return *models[static_cast<std::size_t>(s)]; }
    bool has(Slot s) const { return models[static_cast<std::size_t>(s)].has_value(); }
};

inline Model make_model(const FieldConfig& cfg, std::uint64_t seed) {
    Model m{cfg, init_params(cfg, seed), {}, {}};
    m.m = Eigen::VectorXd::Zero(m.params.values.size());
    m.v = Eigen::VectorXd::Zero(m.params.values.size());
    return m;
}

/// Fresh state. Augmented models exist only when their depth term is enabled.
inline TrainState init_state(const TrainConfig& cfg) {
    cfg.validate();
    TrainState s;
    s.seed = cfg.seed;
    s.config_digest = cfg.digest();
    auto seed_for = [&](Slot slot) { return mix_seed(cfg.seed, 0x5EED, static_cast<std::uint64_t>(slot)); };
    s.models[0] = make_model(cfg.main_field, seed_for(Slot::coarse));
    s.models[1] = make_model(cfg.main_field, seed_for(Slot::fine));
    if (cfg.loss.points > 0.0) s.models[2] = make_model(cfg.points_field, seed_for(Slot::points));
    if (cfg.loss.views > 0.0) s.models[3] = make_model(cfg.views_field, seed_for(Slot::views));
    return s;
}

// ---------------------------------------------------------------------------
// Checkpoint file: "SNRF", u32 version, u64 config digest, i64 iteration,
// i64 adam step, u64 seed, u32 model count; then per model: u32 slot, u32
// variant, i32 hidden_layers, hidden_width, skip_layer, l_p, l_v, l_p_ap, u64
// init seed, u32 layer count, (u32 rows, u32 cols) per layer (F1 then F2),
// u64 parameter count, then params, first moments and second moments as
// little-endian f64 streams.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put(std::string& buf, T v) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    buf.append(bytes, sizeof(T));
}

inline void put_vec(std::string& buf, const Eigen::VectorXd& v) {
    buf.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
}

class Reader {
public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    template <typename T>
    T get() {
        T v;
        need(sizeof(T));
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    Eigen::VectorXd get_vec(std::size_t n) {
        need(n * sizeof(double));
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw DataError("truncated checkpoint '" + path_ + "'");
    }
    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_state(const TrainState& s) {
    std::string buf = "SNRF";
    detail::put<std::uint32_t>(buf, kCheckpointVersion);
    detail::put<std::uint64_t>(buf, s.config_digest);
    detail::put<std::int64_t>(buf, s.iteration);
    detail::put<std::int64_t>(buf, s.adam_step);
    detail::put<std::uint64_t>(buf, s.seed);
    std::uint32_t count = 0;
    for (const auto& m : s.models) count += m ? 1 : 0;
    detail::put<std::uint32_t>(buf, count);
    for (std::size_t slot = 0; slot < s.models.size(); ++slot) {
        if (!s.models[slot]) continue;
        const Model& m = *s.models[slot];
        const FieldConfig& c = m.config;
        detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(slot));
        detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(c.variant));
        for (int v : {c.hidden_layers, c.hidden_width, c.skip_layer, c.l_p, c.l_v, c.l_p_ap})
            detail::put<std::int32_t>(buf, v);
        detail::put<std::uint64_t>(buf, m.params.seed);
        const auto& lay = m.params.layout;
        detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(lay.f1.size() + lay.f2.size()));
        for (const auto* group : {&lay.f1, &lay.f2})
            for (const auto& l : *group) {
                detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(l.rows));
                detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(l.cols));
            }
        detail::put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.params.values.size()));
        detail::put_vec(buf, m.params.values);
        detail::put_vec(buf, m.m);
        detail::put_vec(buf, m.v);
    }
    return buf;
}

inline TrainState deserialize_state(std::string data, const std::string& path = "<memory>") {
    detail::Reader r(std::move(data), path);
    if (r.bytes(4) != "SNRF") throw DataError("'" + path + "' is not a checkpoint (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw DataError("'" + path + "' has unsupported checkpoint version " + std::to_string(version));
    TrainState s;
    s.config_digest = r.get<std::uint64_t>();
    s.iteration = r.get<std::int64_t>();
    s.adam_step = r.get<std::int64_t>();
    s.seed = r.get<std::uint64_t>();
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto slot = r.get<std::uint32_t>();
        if (slot >= s.models.size()) throw DataError("'" + path + "' has an unknown model slot");
        FieldConfig c;
        const auto variant = r.get<std::uint32_t>();
        if (variant > 2) throw DataError("'" + path + "' has an unknown field variant");
        c.variant = static_cast<FieldVariant>(variant);
        c.hidden_layers = r.get<std::int32_t>();
        c.hidden_width = r.get<std::int32_t>();
        c.skip_layer = r.get<std::int32_t>();
        c.l_p = r.get<std::int32_t>();
        c.l_v = r.get<std::int32_t>();
        c.l_p_ap = r.get<std::int32_t>();
        Model m;
        m.config = c;
        try {
            m.params.layout = FieldLayout::of(c);
        } catch (const std::invalid_argument& e) {
            throw DataError("'" + path + "' holds an invalid field config: " + e.what());
        }
        m.params.seed = r.get<std::uint64_t>();
        const auto layers = r.get<std::uint32_t>();
        const auto& lay = m.params.layout;
        if (layers != lay.f1.size() + lay.f2.size()) throw DataError("'" + path + "' layer count mismatch");
        for (const auto* group : {&lay.f1, &lay.f2})
            for (const auto& l : *group) {
                const auto rows = r.get<std::uint32_t>();
                const auto cols = r.get<std::uint32_t>();
                if (rows != static_cast<std::uint32_t>(l.rows) || cols != static_cast<std::uint32_t>(l.cols))
                    throw DataError("'" + path + "' layer shape mismatch");
            }
        const auto n = r.get<std::uint64_t>();
        if (n != lay.size) throw DataError("'" + path + "' parameter count mismatch");
        m.params.values = r.get_vec(n);
        m.m = r.get_vec(n);
        m.v = r.get_vec(n);
        s.models[slot] = std::move(m);
    }
    if (!r.done()) throw DataError("'" + path + "' has trailing bytes");
    if (!s.models[0] || !s.models[1]) throw DataError("'" + path + "' lacks the main model");
    return s;
}

inline void save_checkpoint(const std::filesystem::path& path, const TrainState& s) {
    const auto tmp = path.string() + ".tmp";
    io::write_text(tmp, serialize_state(s));
    std::filesystem::rename(tmp, path);
}

inline TrainState load_checkpoint(const std::filesystem::path& path) {
    return deserialize_state(io::read_text(path), path.string());
}

// ---------------------------------------------------------------------------

/// One ray of a training batch.
struct BatchRay {
    int view = 0;  // dataset view index
    int x = 0;
    int y = 0;
    std::optional<double> z_sparse;
};

struct StepStats {
    LossBreakdown loss;
    double lr = 0.0;
    long masks_computed = 0;
};

/// Per-model forward results for one batch.
struct BatchForward {
    std::vector<BatchRay> rays;
    std::vector<Ray> world_rays;
    std::optional<FieldPass> coarse, fine, points, views;
};

class Trainer {
public:
    Trainer(TrainConfig cfg, const Dataset& data) : cfg_(std::move(cfg)), data_(data) {
        cfg_.loss.warmup_iters = cfg_.warmup_iters();
        cfg_.validate();
        require(!data_.train.empty(), "trainer: dataset has no training views");
        by_view_.resize(data_.train.size());
        train_poses_ = data_.train_poses();
        for (std::size_t i = 0; i < data_.train.size(); ++i) {
            const std::size_t nn = data_.train.size() >= 2 ? nearest_train_view(i, train_poses_) : i;
            nearest_.push_back(data_.train[nn]);
        }
        for (const auto& p : data_.sparse) {
            for (std::size_t i = 0; i < data_.train.size(); ++i)
                if (data_.train[i] == p.view) by_view_[i].push_back(p);
        }
    }

    const TrainConfig& config() const { return cfg_; }

    /// Number of patch-reprojection mask evaluations so far (instrumentation).
    long mask_computations() const { return mask_computations_; }

    /// Draws the batch for `iteration`: uniform train pixels plus every
    /// sparse-depth keypoint of one randomly chosen train view.
    std::vector<BatchRay> sample_batch(long iteration) const {
        Rng rng(mix_seed(cfg_.seed, static_cast<std::uint64_t>(iteration), 0xBA7C4));
        std::vector<BatchRay> rays;
        for (int i = 0; i < cfg_.batch_rays; ++i) {
            const std::size_t t = rng.index(data_.train.size());
            const int v = data_.train[t];
            const auto& img = data_.views[static_cast<std::size_t>(v)].image;
            const int x = static_cast<int>(rng.index(static_cast<std::size_t>(img.width)));
            const int y = static_cast<int>(rng.index(static_cast<std::size_t>(img.height)));
            rays.push_back({v, x, y, std::nullopt});
        }
        if (cfg_.loss.sparse_depth > 0.0 && !data_.sparse.empty()) {
            const std::size_t t = rng.index(data_.train.size());
            for (const auto& p : by_view_[t]) rays.push_back({p.view, p.x, p.y, p.depth});
        }
        return rays;
    }

    /// Renders every model present in `state` over the batch.
    BatchForward forward(const TrainState& state, std::vector<BatchRay> rays, long iteration, bool keep_tape) const {
        BatchForward fw;
        fw.rays = std::move(rays);
        std::vector<SampleSet> coarse_sets;
        std::vector<Rng> rngs;
        for (std::size_t r = 0; r < fw.rays.size(); ++r) {
            const auto& br = fw.rays[r];
            fw.world_rays.push_back(pixel_ray(data_.views[static_cast<std::size_t>(br.view)].camera, br.x, br.y));
            rngs.emplace_back(mix_seed(cfg_.seed, static_cast<std::uint64_t>(iteration), r + 1));
            coarse_sets.push_back(stratified_sample(cfg_.render.near, cfg_.render.far, cfg_.render.n_coarse, rngs.back()));
        }
        fw.coarse = render_pass(state.model(Slot::coarse).ref(), fw.world_rays, coarse_sets, keep_tape);
        std::vector<SampleSet> fine_sets;
        for (std::size_t r = 0; r < fw.rays.size(); ++r) {
            if (cfg_.render.n_fine > 0)
                fine_sets.push_back(hierarchical_sample(fw.coarse->outputs[r].weights, coarse_sets[r], cfg_.render.n_fine,
                                                        rngs[r], cfg_.render.epsilon));
            else
                fine_sets.push_back(coarse_sets[r]);
        }
        fw.fine = render_pass(state.model(Slot::fine).ref(), fw.world_rays, std::move(fine_sets), keep_tape);
        if (state.has(Slot::points))
            fw.points = render_pass(state.model(Slot::points).ref(), fw.world_rays, coarse_sets, keep_tape);
        if (state.has(Slot::views))
            fw.views = render_pass(state.model(Slot::views).ref(), fw.world_rays, coarse_sets, keep_tape);
        return fw;
    }

    /// Loss inputs for a forward batch, including the reliability masks when
    /// the regularizers are active.
    RayBatchOutputs loss_inputs(const BatchForward& fw, long iteration) {
        RayBatchOutputs batch;
        batch.has_ap = fw.points.has_value();
        batch.has_av = fw.views.has_value();
        for (std::size_t r = 0; r < fw.rays.size(); ++r) {
            const auto& br = fw.rays[r];
            RayTerms t;
            t.gt = data_.views[static_cast<std::size_t>(br.view)].image.at(br.x, br.y);
            t.c_c = fw.coarse->outputs[r].color;
            t.z_c = fw.coarse->outputs[r].depth;
            t.c_f = fw.fine->outputs[r].color;
            t.z_f = fw.fine->outputs[r].depth;
            if (fw.points) {
                t.c_ap = fw.points->outputs[r].color;
                t.z_ap = fw.points->outputs[r].depth;
            }
            if (fw.views) {
                t.c_av = fw.views->outputs[r].color;
                t.z_av = fw.views->outputs[r].depth;
            }
            t.z_sparse = br.z_sparse;
            batch.rays.push_back(t);
        }
        if (regularizers_active(cfg_.loss, iteration) && cfg_.loss.reliable_depth) compute_masks(fw, batch);
        return batch;
    }

    /// One optimization step on `state`.
    StepStats step(TrainState& state) {
        const long it = state.iteration;
        StepStats stats;
        stats.lr = lr_at(std::min(it, cfg_.iterations), cfg_);
        const long masks_before = mask_computations_;
        BatchForward fw = forward(state, sample_batch(it), it, true);
        const RayBatchOutputs batch = loss_inputs(fw, it);
        TotalLoss loss = total_loss(batch, cfg_.loss, it);
        stats.loss = loss.breakdown;
        stats.masks_computed = mask_computations_ - masks_before;
        check_finite(loss.breakdown, it);

        std::array<Eigen::VectorXd, 4> grads;
        backward(state, fw, loss.grads, grads);

        ++state.adam_step;
        for (std::size_t s = 0; s < 4; ++s) {
            if (!state.models[s]) continue;
            Model& m = *state.models[s];
            if (!grads[s].allFinite())
                throw NumericalError("non-finite gradient for model " + std::string(slot_name(static_cast<Slot>(s))) +
                                     " at iteration " + std::to_string(it));
            adam_update(m.params.values, grads[s], m.m, m.v, state.adam_step, stats.lr, cfg_.beta1, cfg_.beta2,
                        cfg_.adam_eps);
        }
        ++state.iteration;
        return stats;
    }

    /// Accumulates parameter gradients of every present model for per-ray loss gradients.
    void backward(const TrainState& state, const BatchForward& fw, const std::vector<RayGrads>& g,
                  std::array<Eigen::VectorXd, 4>& grads) const {
        const std::size_t n = fw.rays.size();
        std::vector<Color> dc(n);
        std::vector<double> dz(n);
        auto run = [&](Slot slot, const std::optional<FieldPass>& pass, auto color_of, auto depth_of) {
            const auto s = static_cast<std::size_t>(slot);
            if (!state.models[s]) return;
            grads[s] = Eigen::VectorXd::Zero(state.models[s]->params.values.size());
            for (std::size_t r = 0; r < n; ++r) {
                dc[r] = color_of(g[r]);
                dz[r] = depth_of(g[r]);
            }
            backward_pass(state.models[s]->ref(), *pass, dc, dz, grads[s]);
        };
        run(Slot::coarse, fw.coarse, [](const RayGrads& r) { return r.c_c; }, [](const RayGrads& r) { return r.z_c; });
        run(Slot::fine, fw.fine, [](const RayGrads& r) { return r.c_f; }, [](const RayGrads& r) { return r.z_f; });
        run(Slot::points, fw.points, [](const RayGrads& r) { return r.c_ap; }, [](const RayGrads& r) { return r.z_ap; });
        run(Slot::views, fw.views, [](const RayGrads& r) { return r.c_av; }, [](const RayGrads& r) { return r.z_av; });
    }

private:
    std::optional<double> patch_error(const BatchRay& br, double z) const {
        if (!(z > 0.0) || !std::isfinite(z)) return std::nullopt;
        std::size_t t = 0;
        while (data_.train[t] != br.view) ++t;
        const int dst = nearest_[t];
        if (dst == br.view) return std::nullopt;
        const auto& sv = data_.views[static_cast<std::size_t>(br.view)];
        const auto& dv = data_.views[static_cast<std::size_t>(dst)];
        return patch_reprojection_error(br.x, br.y, z, PatchView{&sv.camera, &sv.image},
                                        PatchView{&dv.camera, &dv.image}, cfg_.reliability);
    }

    void compute_masks(const BatchForward& fw, RayBatchOutputs& batch) {
        const double tau = cfg_.reliability.e_tau;
        for (std::size_t r = 0; r < fw.rays.size(); ++r) {
            RayTerms& t = batch.rays[r];
            const auto e_c = patch_error(fw.rays[r], t.z_c);
            if (batch.has_ap) {
                t.m_ap = reliability_mask(e_c, patch_error(fw.rays[r], t.z_ap), tau).value;
                ++mask_computations_;
            }
            if (batch.has_av) {
                t.m_av = reliability_mask(e_c, patch_error(fw.rays[r], t.z_av), tau).value;
                ++mask_computations_;
            }
            if (cfg_.loss.cfc > 0.0) {
                t.m_cfc = reliability_mask(e_c, patch_error(fw.rays[r], t.z_f), tau).value;
                ++mask_computations_;
            }
        }
    }

    static void check_finite(const LossBreakdown& b, long it) {
        const std::pair<const char*, double> terms[] = {{"L_color", b.color}, {"L_sd", b.sparse_depth},
                                                        {"L_ap", b.points},   {"L_av", b.views},
                                                        {"L_cfc", b.cfc},     {"total", b.total}};
        for (const auto& [name, value] : terms)
            if (!std::isfinite(value))
                throw NumericalError(std::string("non-finite ") + name + " = " + io::fmt_double(value) +
                                     " at iteration " + std::to_string(it));
    }

    TrainConfig cfg_;
    const Dataset& data_;
    std::vector<Pose> train_poses_;
    std::vector<int> nearest_;                       // per train slot: dataset index of its nearest train view
    std::vector<std::vector<SparsePoint>> by_view_;  // per train slot
    long mask_computations_ = 0;
};

inline std::string metrics_header() { return "iter,lr,L_color,L_sd,L_ap,L_av,L_cfc,total\n"; }

inline std::string metrics_row(long iteration, const StepStats& s) {
    const auto& b = s.loss;
    return std::to_string(iteration) + "," + io::fmt_double(s.lr) + "," + io::fmt_double(b.color) + "," +
           io::fmt_double(b.sparse_depth) + "," + io::fmt_double(b.points) + "," + io::fmt_double(b.views) + "," +
           io::fmt_double(b.cfc) + "," + io::fmt_double(b.total) + "\n";
}

struct TrainOptions {
    long checkpoint_every = 1000;  // 0: only the final checkpoint
    bool resume = false;
    std::optional<long> stop_at;   // stop early (simulated interruption)
    std::function<void(long, const StepStats&)> on_step;
};

struct TrainResult {
    TrainState state;
    std::filesystem::path checkpoint;
    std::filesystem::path metrics;
};

/// Runs the optimization loop, writing `checkpoint.snrf` and `metrics.csv`
/// into `out_dir`. With `resume`, continues from the checkpoint there.
inline TrainResult train(const TrainConfig& cfg_in, const Dataset& data, const std::filesystem::path& out_dir,
                         const TrainOptions& opt = {}) {
    namespace fs = std::filesystem;
    Trainer trainer(cfg_in, data);
    const TrainConfig& cfg = trainer.config();
    fs::create_directories(out_dir);
    TrainResult res;
    res.checkpoint = out_dir / "checkpoint.snrf";
    res.metrics = out_dir / "metrics.csv";

    std::string log = metrics_header();
    if (opt.resume) {
        if (!fs::exists(res.checkpoint)) throw DataError("cannot resume: '" + res.checkpoint.string() + "' not found");
        res.state = load_checkpoint(res.checkpoint);
        if (res.state.config_digest != cfg.digest())
            throw ConfigError("cannot resume: checkpoint '" + res.checkpoint.string() +
                              "' was written with a different configuration");
        if (fs::exists(res.metrics)) {
            std::istringstream in(io::read_text(res.metrics));
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                const long it = std::stol(line.substr(0, line.find(',')));
                if (it < res.state.iteration) log += line + "\n";
            }
        }
    } else {
        res.state = init_state(cfg);
    }

    std::ofstream metrics(res.metrics, std::ios::binary | std::ios::trunc);
    if (!metrics) throw DataError("cannot write '" + res.metrics.string() + "'");
    metrics << log;
    const long end = opt.stop_at ? std::min(*opt.stop_at, cfg.iterations) : cfg.iterations;
    while (res.state.iteration < end) {
        const long it = res.state.iteration;
        const StepStats stats = trainer.step(res.state);
        metrics << metrics_row(it, stats);
        if (opt.on_step) opt.on_step(it, stats);
        if (opt.checkpoint_every > 0 && res.state.iteration % opt.checkpoint_every == 0) {
            metrics.flush();
            save_checkpoint(res.checkpoint, res.state);
        }
    }
    metrics.flush();
    if (!metrics) throw DataError("failed writing '" + res.metrics.string() + "'");
    save_checkpoint(res.checkpoint, res.state);
    return res;
}

struct RenderedView {
    Image image;
    DepthMap depth;         // main fine depth
    DepthMap coarse_depth;  // main coarse depth
    std::vector<double> opacity;
};

/// Full-frame render with the main coarse + fine models only.
inline RenderedView render_view(const TrainState& state, const Camera& cam, const RenderConfig& rcfg,
                                std::uint64_t seed, int chunk = 512) {
    rcfg.validate();
    const int w = cam.intrinsics.width, h = cam.intrinsics.height;
    RenderedView out{Image(w, h), DepthMap(w, h), DepthMap(w, h),
                     std::vector<double>(static_cast<std::size_t>(w) * h, 0.0)};
    const int total = w * h;
    for (int start = 0; start < total; start += chunk) {
        const int end = std::min(total, start + chunk);
        std::vector<Ray> rays;
        std::vector<SampleSet> coarse_sets;
        std::vector<Rng> rngs;
        for (int p = start; p < end; ++p) {
            rays.push_back(pixel_ray(cam, p % w, p / w));
            rngs.emplace_back(mix_seed(seed, static_cast<std::uint64_t>(p), 0x7E57));
            coarse_sets.push_back(stratified_sample(rcfg.near, rcfg.far, rcfg.n_coarse, rngs.back()));
        }
        FieldPass coarse = render_pass(state.model(Slot::coarse).ref(), rays, coarse_sets, false);
        std::vector<SampleSet> fine_sets;
        for (std::size_t r = 0; r < rays.size(); ++r)
            fine_sets.push_back(rcfg.n_fine > 0 ? hierarchical_sample(coarse.outputs[r].weights, coarse_sets[r],
                                                                       rcfg.n_fine, rngs[r], rcfg.epsilon)
                                                : coarse_sets[r]);
        FieldPass fine = render_pass(state.model(Slot::fine).ref(), rays, std::move(fine_sets), false);
        for (int p = start; p < end; ++p) {
            const auto r = static_cast<std::size_t>(p - start);
            const int x = p % w, y = p / w;
            out.image.set(x, y, fine.outputs[r].color);
            out.depth.set(x, y, fine.outputs[r].depth);
            out.coarse_depth.set(x, y, coarse.outputs[r].depth);
            out.opacity[static_cast<std::size_t>(p)] = fine.outputs[r].opacity;
        }
    }
    return out;
}

}  // namespace snerf
