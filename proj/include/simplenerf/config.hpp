// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/common.hpp"
#include "simplenerf/io.hpp"
#include "simplenerf/scene.hpp"
#include "simplenerf/trainer.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace snerf {

struct SceneConfig {
    std::string name = "threeplanes";
    int width = 64;
    int height = 64;
    double focal = 88.0;
    int views = 8;
    int train_views = 2;
    double ring_radius = 0.3;
    double near = 1.0;
    double far = 5.0;
    std::uint64_t seed = 0;
    SparseDepthConfig sparse;
    // Plane depths measured from the camera ring along the viewing axis, keyed
    // by primitive name ("plane1", ...). Unset planes keep the built-in layout.
    std::map<std::string, double> plane_depth;

    SceneSpec spec() const {
        SceneSpec s = builtin_scene(name);
        s.width = width;
        s.height = height;
        s.focal = focal;
        s.ring.count = views;
        s.ring.radius = ring_radius;
        s.near = near;
        s.far = far;
        s.train_views = train_views;
        for (const auto& [prim, depth] : plane_depth) {
            auto it = std::find_if(s.primitives.begin(), s.primitives.end(),
                                   [&](const Primitive& p) { return p.name == prim; });
            if (it == s.primitives.end() || it->kind != PrimitiveKind::plane)
                throw ConfigError("scene." + prim + "_depth: scene '" + name + "' has no plane named '" + prim + "'");
            it->center.z() = s.ring.center.z() + depth;
        }
        return s;
    }
};

struct EvalConfig {
    double visibility_factor = 0.05;
    std::uint64_t seed = 0;  // sample jitter for test renders
};

/// Everything a command needs; serializes to and from the sectioned text format.
struct RunConfig {
    SceneConfig scene;
    TrainConfig train;
    EvalConfig eval;
    long checkpoint_every = 1000;
    std::string preset = "simplenerf";

    RunConfig() {
        train.main_field.hidden_width = 32;
        train.points_field.hidden_width = 32;
        train.views_field.hidden_width = 32;
        train.render.n_coarse = 16;
        train.render.n_fine = 32;
        train.batch_rays = 32;
    }
};

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"simplenerf", "dsnerf-baseline", "no-points",
                                                   "no-views",   "no-cfc",          "no-reliable-depth",
                                                   "identical-aug", "small-aug"};
    return names;
}

/// Ablation presets, applied on top of the current loss and field settings.
inline void apply_preset(RunConfig& cfg, const std::string& name) {
    LossWeights& w = cfg.train.loss;
    if (name == "simplenerf") {
    } else if (name == "dsnerf-baseline") {
        w.points = w.views = w.cfc = 0.0;
    } else if (name == "no-points") {
        w.points = 0.0;
    } else if (name == "no-views") {
        w.views = 0.0;
    } else if (name == "no-cfc") {
        w.cfc = 0.0;
    } else if (name == "no-reliable-depth") {
        w.reliable_depth = false;
    } else if (name == "identical-aug") {
        cfg.train.points_field = cfg.train.main_field;
        cfg.train.views_field = cfg.train.main_field;
    } else if (name == "small-aug") {
        cfg.train.points_field = cfg.train.main_field;
        cfg.train.points_field.hidden_layers = std::max(1, cfg.train.main_field.hidden_layers / 2);
        if (cfg.train.points_field.skip_layer >= cfg.train.points_field.hidden_layers)
            cfg.train.points_field.skip_layer = -1;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    cfg.preset = name;
}

namespace detail {

struct Key {
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
};

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* b = text.data();
    const char* e = b + text.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) throw ConfigError(key + ": cannot parse '" + text + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

class KeyTable {
public:
    template <typename T>
    void num(const std::string& name, T& ref) {
        keys_[name] = {[&ref] {
                           if constexpr (std::is_floating_point_v<T>) return io::fmt_double(ref);
                           else return std::to_string(ref);
                       },
                       [&ref, name](const std::string& v) { ref = parse_number<T>(name, v); }};
        order_.push_back(name);
    }
    void flag(const std::string& name, bool& ref) {
        keys_[name] = {[&ref] { return std::string(ref ? "true" : "false"); },
                       [&ref, name](const std::string& v) { ref = parse_bool(name, v); }};
        order_.push_back(name);
    }
    void text(const std::string& name, std::string& ref) {
        keys_[name] = {[&ref] { return ref; }, [&ref](const std::string& v) { ref = v; }};
        order_.push_back(name);
    }
    void variant(const std::string& name, FieldVariant& ref) {
        keys_[name] = {[&ref] { return std::string(to_string(ref)); }, [&ref, name](const std::string& v) {
                           try {
                               ref = parse_variant(v);
                           } catch (const ConfigError&) {
                               throw ConfigError(name + ": unknown field variant '" + v + "'");
                           }
                       }};
        order_.push_back(name);
    }
    void custom(const std::string& name, std::function<std::string()> get,
                std::function<void(const std::string&)> set) {
        keys_[name] = {std::move(get), std::move(set)};
        order_.push_back(name);
    }
    void field(const std::string& prefix, FieldConfig& f, bool with_variant) {
        if (with_variant) variant(prefix + "variant", f.variant);
        num(prefix + "hidden_layers", f.hidden_layers);
        num(prefix + "hidden_width", f.hidden_width);
        num(prefix + "skip_layer", f.skip_layer);
        num(prefix + "l_p", f.l_p);
        num(prefix + "l_v", f.l_v);
        num(prefix + "l_p_ap", f.l_p_ap);
    }

    const Key* find(const std::string& name) const {
        auto it = keys_.find(name);
        return it == keys_.end() ? nullptr : &it->second;
    }
    const std::vector<std::string>& order() const { return order_; }

private:
    std::map<std::string, Key> keys_;
    std::vector<std::string> order_;
};

inline KeyTable key_table(RunConfig& c) {
    KeyTable t;
    SceneConfig& s = c.scene;
    t.text("scene.name", s.name);
    t.num("scene.width", s.width);
    t.num("scene.height", s.height);
    t.num("scene.focal", s.focal);
    t.num("scene.views", s.views);
    t.num("scene.train_views", s.train_views);
    t.num("scene.ring_radius", s.ring_radius);
    t.num("scene.near", s.near);
    t.num("scene.far", s.far);
    t.num("scene.seed", s.seed);
    t.num("scene.sparse_per_view", s.sparse.per_view);
    t.num("scene.sparse_noise", s.sparse.noise);
    t.num("scene.sparse_percentile", s.sparse.percentile);

    RenderConfig& r = c.train.render;
    t.num("render.n_coarse", r.n_coarse);
    t.num("render.n_fine", r.n_fine);
    t.num("render.epsilon", r.epsilon);

    TrainConfig& tr = c.train;
    // Listed first so explicit keys that follow refine the preset.
    t.custom("train.preset", [&c] { return c.preset; }, [&c](const std::string& v) { apply_preset(c, v); });
    t.num("train.iterations", tr.iterations);
    t.num("train.batch_rays", tr.batch_rays);
    t.num("train.lr_init", tr.lr_init);
    t.num("train.lr_final", tr.lr_final);
    t.num("train.beta1", tr.beta1);
    t.num("train.beta2", tr.beta2);
    t.num("train.adam_eps", tr.adam_eps);
    t.num("train.warmup_fraction", tr.warmup_fraction);
    t.num("train.seed", tr.seed);
    t.num("train.checkpoint_every", c.checkpoint_every);
    t.field("train.", tr.main_field, false);
    t.field("train.points_", tr.points_field, true);
    t.field("train.views_", tr.views_field, true);

    LossWeights& w = c.train.loss;
    t.num("loss.color", w.color);
    t.num("loss.sparse_depth", w.sparse_depth);
    t.num("loss.points", w.points);
    t.num("loss.views", w.views);
    t.num("loss.cfc", w.cfc);
    t.flag("loss.reliable_depth", w.reliable_depth);

    t.num("reliability.k", c.train.reliability.k);
    t.num("reliability.e_tau", c.train.reliability.e_tau);

    t.num("eval.visibility_factor", c.eval.visibility_factor);
    t.num("eval.seed", c.eval.seed);
    return t;
}

}  // namespace detail

/// Sets one dotted key. `scene.<plane>_depth` keys are open-ended.
inline void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    const std::string v = detail::trim(value);
    const std::string suffix = "_depth";
    if (key.rfind("scene.", 0) == 0 && key.size() > 6 + suffix.size() &&
        key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0) {
        const std::string prim = key.substr(6, key.size() - 6 - suffix.size());
        cfg.scene.plane_depth[prim] = detail::parse_number<double>(key, v);
        return;
    }
    auto table = detail::key_table(cfg);
    const auto* k = table.find(key);
    if (!k) throw ConfigError("unknown config key '" + key + "'");
    k->set(v);
}

/// Applies `section.key=value`.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
    set_key(cfg, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

/// Parses the sectioned `key = value` format into `cfg`.
inline void parse_config(RunConfig& cfg, const std::string& text, const std::string& origin = "<config>") {
    static const std::vector<std::string> sections = {"scene", "render", "train", "loss", "reliability", "eval"};
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (std::find(sections.begin(), sections.end(), section) == sections.end())
                throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        if (section.empty()) throw ConfigError(where + ": key outside of any section");
        const std::string key = detail::trim(line.substr(0, eq));
        try {
            set_key(cfg, section + "." + key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
}

/// Canonical resolved text; parse_config of this text reproduces `cfg`.
inline std::string to_text(const RunConfig& cfg_in) {
    RunConfig cfg = cfg_in;
    auto table = detail::key_table(cfg);
    std::ostringstream out;
    out << "# resolved configuration\n";
    std::string section;
    for (const auto& name : table.order()) {
        const auto dot = name.find('.');
        const std::string sec = name.substr(0, dot);
        if (sec != section) {
            out << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
            section = sec;
            if (sec == "scene")
                for (const auto& [prim, depth] : cfg.scene.plane_depth)
                    out << prim << "_depth = " << io::fmt_double(depth) << "\n";
        }
        out << name.substr(dot + 1) << " = " << table.find(name)->get() << "\n";
    }
    return out.str();
}

inline void validate(const RunConfig& cfg) {
    try {
        cfg.train.validate();
        cfg.train.reliability.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be non-negative");
    if (!(cfg.eval.visibility_factor > 0.0)) throw ConfigError("eval.visibility_factor must be positive");
}

}  // namespace snerf
