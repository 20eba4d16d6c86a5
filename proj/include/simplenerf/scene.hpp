// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/camera.hpp"
#include "simplenerf/common.hpp"
#include "simplenerf/dataset.hpp"
#include "simplenerf/image.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

// Analytic ray-traced scenes with exact depth, used as ground truth.

namespace snerf {

enum class TextureKind { solid, checker, noise };

struct Texture {
    TextureKind kind = TextureKind::solid;
    Color a = Color::Constant(0.5);
    Color b = Color::Constant(0.5);
    double scale = 1.0;  // checker cell size / noise lattice spacing, world units
    std::uint64_t seed = 0;

    Color eval(double u, double v) const {
        switch (kind) {
            case TextureKind::solid: return a;
            case TextureKind::checker: {
                const long iu = static_cast<long>(std::floor(u / scale));
                const long iv = static_cast<long>(std::floor(v / scale));
                return ((iu + iv) & 1) ? b : a;
            }
            case TextureKind::noise: {
                const double fu = u / scale, fv = v / scale;
                const double x0 = std::floor(fu), y0 = std::floor(fv);
                const double tx = smooth(fu - x0), ty = smooth(fv - y0);
                const auto lx = static_cast<long>(x0), ly = static_cast<long>(y0);
                const double n = lerp(lerp(lattice(lx, ly), lattice(lx + 1, ly), tx),
                                      lerp(lattice(lx, ly + 1), lattice(lx + 1, ly + 1), tx), ty);
                return a + n * (b - a);
            }
        }
        return a;
    }

private:
    static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
    static double lerp(double p, double q, double t) { return p + t * (q - p); }
    double lattice(long x, long y) const {
        const auto h = mix_seed(seed, static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y));
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    }
};

struct Material {
    bool specular = false;
    double shininess = 32.0;
    double ks = 0.6;
};

enum class PrimitiveKind { plane, sphere, box };

struct Primitive {
    PrimitiveKind kind = PrimitiveKind::plane;
    std::string name;
    Vec3 center = Vec3::Zero();
    // plane: unit normal and in-plane u axis; half_size bounds the rectangle
    // (infinite when non-finite)
    Vec3 normal = Vec3(0, 0, -1);
    Vec3 u_axis = Vec3(1, 0, 0);
    Vec2 half_size = Vec2::Constant(std::numeric_limits<double>::infinity());
    double radius = 0.0;             // sphere
    Vec3 half_extent = Vec3::Zero();  // box (axis-aligned)
    Texture texture;
    Material material;
};

struct CameraRing {
    int count = 8;
    double radius = 0.3;
    Vec3 center = Vec3(0, 0, -2.6);   // ring lies in the plane z = center.z
    Vec3 look_at = Vec3(0, 0, 0.6);
};

struct SceneSpec {
    std::string name = "threeplanes";
    std::vector<Primitive> primitives;  // includes the background plane
    CameraRing ring;
    int width = 64;
    int height = 64;
    double focal = 88.0;
    double near = 1.0;
    double far = 5.0;
    int train_views = 2;
    Vec3 light_dir = Vec3(-0.4, -0.6, -1.0).normalized();  // toward the light
    double ambient = 0.2;
};

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    Vec3 normal = Vec3::Zero();
    Vec2 uv = Vec2::Zero();
    const Primitive* prim = nullptr;
};

namespace detail {

inline std::optional<Hit> intersect(const Primitive& p, const Ray& ray) {
    constexpr double kEps = 1e-9;
    switch (p.kind) {
        case PrimitiveKind::plane: {
            const double denom = p.normal.dot(ray.direction);
            if (std::abs(denom) < kEps) return std::nullopt;
            const double t = p.normal.dot(p.center - ray.origin) / denom;
            if (t <= kEps) return std::nullopt;
            const Vec3 local = ray.at(t) - p.center;
            const Vec3 v_axis = p.normal.cross(p.u_axis);
            const double u = local.dot(p.u_axis), v = local.dot(v_axis);
            if (std::abs(u) > p.half_size.x() || std::abs(v) > p.half_size.y()) return std::nullopt;
            return Hit{t, denom < 0 ? p.normal : Vec3(-p.normal), Vec2(u, v), &p};
        }
        case PrimitiveKind::sphere: {
            const Vec3 oc = ray.origin - p.center;
            const double b = oc.dot(ray.direction);
            const double c = oc.squaredNorm() - p.radius * p.radius;
            const double disc = b * b - c;
            if (disc < 0.0) return std::nullopt;
            const double sq = std::sqrt(disc);
            double t = -b - sq;
            if (t <= kEps) t = -b + sq;
            if (t <= kEps) return std::nullopt;
            const Vec3 n = (ray.at(t) - p.center).normalized();
            const double u = std::atan2(n.x(), -n.z()) * p.radius;
            const double v = std::asin(std::clamp(n.y(), -1.0, 1.0)) * p.radius;
            return Hit{t, n, Vec2(u, v), &p};
        }
        case PrimitiveKind::box: {
            double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
            int axis = 0;
            for (int a = 0; a < 3; ++a) {
                const double lo = p.center[a] - p.half_extent[a], hi = p.center[a] + p.half_extent[a];
                if (std::abs(ray.direction[a]) < kEps) {
                    if (ray.origin[a] < lo || ray.origin[a] > hi) return std::nullopt;
                    continue;
                }
                double ta = (lo - ray.origin[a]) / ray.direction[a];
                double tb = (hi - ray.origin[a]) / ray.direction[a];
                if (ta > tb) std::swap(ta, tb);
                if (ta > t0) {
                    t0 = ta;
                    axis = a;
                }
                t1 = std::min(t1, tb);
            }
            if (t0 > t1 || t0 <= kEps) return std::nullopt;
            Vec3 n = Vec3::Zero();
            n[axis] = ray.direction[axis] > 0 ? -1.0 : 1.0;
            const Vec3 local = ray.at(t0) - p.center;
            const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
            return Hit{t0, n, Vec2(local[ua], local[va]), &p};
        }
    }
    return std::nullopt;
}

inline Color shade(const SceneSpec& spec, const Hit& hit, const Ray& ray) {
    const Primitive& p = *hit.prim;
    const Color albedo = p.texture.eval(hit.uv.x(), hit.uv.y());
    const double diffuse = std::max(0.0, hit.normal.dot(spec.light_dir));
    Color c = albedo * (spec.ambient + (1.0 - spec.ambient) * diffuse);
    if (p.material.specular) {
        const Vec3 reflected = 2.0 * hit.normal.dot(spec.light_dir) * hit.normal - spec.light_dir;
        const double spec_term = std::pow(std::max(0.0, reflected.dot(-ray.direction)), p.material.shininess);
        c += Color::Constant(p.material.ks * spec_term);
    }
    return c.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace detail

/// Nearest intersection over all primitives.
inline std::optional<Hit> trace(const SceneSpec& spec, const Ray& ray) {
    std::optional<Hit> best;
    for (const auto& p : spec.primitives) {
        auto h = detail::intersect(p, ray);
        if (h && (!best || h->t < best->t)) best = h;
    }
    return best;
}

inline std::vector<Camera> ring_cameras(const SceneSpec& spec) {
    std::vector<Camera> cams;
    const Intrinsics k = Intrinsics::centered(spec.width, spec.height, spec.focal);
    for (int i = 0; i < spec.ring.count; ++i) {
        const double a = 2.0 * std::numbers::pi * i / spec.ring.count;
        const Vec3 eye = spec.ring.center + spec.ring.radius * Vec3(std::cos(a), std::sin(a), 0.0);
        cams.push_back({k, Pose::look_at(eye, spec.ring.look_at)});
    }
    return cams;
}

/// Rejects specs whose geometry leaves the encoding-safe box [-pi, pi]^3 or
/// the [near, far] range. Error messages name the offending config key.
inline void validate_scene(const SceneSpec& spec) {
    if (spec.width < 8 || spec.height < 8) throw ConfigError("scene.width/scene.height must be at least 8");
    if (spec.ring.count < 2) throw ConfigError("scene.views must be at least 2");
    if (spec.train_views < 1 || spec.train_views >= spec.ring.count)
        throw ConfigError("scene.train_views must be in [1, scene.views)");
    if (!(spec.focal > 0.0)) throw ConfigError("scene.focal must be positive");
    if (!(spec.near > 0.0 && spec.near < spec.far)) throw ConfigError("scene.near/scene.far must satisfy 0 < near < far");
    constexpr double box = std::numbers::pi;
    for (const auto& cam : ring_cameras(spec)) {
        for (int cx : {0, spec.width})
            for (int cy : {0, spec.height})
                for (double s : {spec.near, spec.far}) {
                    const Vec3 p = generate_ray(cam, Vec2(cx, cy)).at(s);
                    if (p.cwiseAbs().maxCoeff() > box)
                        throw ConfigError("scene.far=" + std::to_string(spec.far) +
                                          " lets rays leave the [-pi, pi]^3 encoding box");
                }
        for (const auto& prim : spec.primitives) {
            const double d = (prim.center - cam.pose.center()).norm();
            const std::string key = "scene." + prim.name + "_depth";
            if (prim.kind == PrimitiveKind::plane) {
                const double axial = std::abs(prim.normal.dot(prim.center - cam.pose.center()));
                if (axial >= spec.far) throw ConfigError(key + " places plane '" + prim.name + "' beyond scene.far");
                if (axial <= spec.near) throw ConfigError(key + " places plane '" + prim.name + "' before scene.near");
            } else if (d + prim.radius >= spec.far || d - prim.radius - prim.half_extent.norm() <= spec.near) {
                throw ConfigError(key + " places '" + prim.name + "' outside [scene.near, scene.far]");
            }
        }
    }
}

/// Renders every ring camera: images in [0, 1] plus exact along-ray depth.
/// Train views are spread uniformly around the ring; the rest are test views.
inline Dataset generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    validate_scene(spec);
    SceneSpec seeded = spec;
    for (std::size_t i = 0; i < seeded.primitives.size(); ++i)
        seeded.primitives[i].texture.seed = mix_seed(seed, i, seeded.primitives[i].texture.seed);

    Dataset data;
    data.name = spec.name;
    data.near = spec.near;
    data.far = spec.far;
    for (const auto& cam : ring_cameras(spec)) {
        CameraView view{cam, Image(spec.width, spec.height), DepthMap(spec.width, spec.height)};
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                const Ray ray = pixel_ray(cam, x, y);
                const auto hit = trace(seeded, ray);
                if (!hit) continue;
                view.image.set(x, y, detail::shade(seeded, *hit, ray));
                view.depth->set(x, y, hit->t);
            }
        for (std::size_t i = 0; i < view.depth->depth.size(); ++i) {
            if (!view.depth->valid[i]) continue;
            const double d = view.depth->depth[i];
            if (d <= spec.near || d >= spec.far)
                throw ConfigError("scene geometry at depth " + std::to_string(d) +
                                  " falls outside (scene.near, scene.far)");
        }
        data.views.push_back(std::move(view));
    }
    const int n = spec.ring.count;
    std::vector<bool> is_train(static_cast<std::size_t>(n), false);
    for (int k = 0; k < spec.train_views; ++k) {
        const int idx = static_cast<int>(std::lround(static_cast<double>(k) * n / spec.train_views)) % n;
        is_train[static_cast<std::size_t>(idx)] = true;
    }
    for (int i = 0; i < n; ++i) (is_train[static_cast<std::size_t>(i)] ? data.train : data.test).push_back(i);
    return data;
}

namespace detail {

inline Primitive fronto_plane(std::string name, Vec3 center, Vec2 half, Texture tex) {
    Primitive p;
    p.kind = PrimitiveKind::plane;
    p.name = std::move(name);
    p.center = center;
    p.half_size = half;
    p.texture = tex;
    return p;
}

}  // namespace detail

/// Three staggered textured fronto-parallel planes in front of a textured
/// background: depth edges everywhere the planes overlap.
inline SceneSpec threeplanes_scene() {
    SceneSpec s;
    s.name = "threeplanes";
    const double inf = std::numeric_limits<double>::infinity();
    s.primitives.push_back(detail::fronto_plane(
        "plane1", Vec3(-0.33, 0.2, -1.0), Vec2(0.28, 0.4),
        Texture{TextureKind::checker, Color(0.9, 0.3, 0.2), Color(0.95, 0.85, 0.3), 0.09, 1}));
    s.primitives.push_back(detail::fronto_plane(
        "plane2", Vec3(0.15, -0.3, -0.2), Vec2(0.4, 0.4),
        Texture{TextureKind::checker, Color(0.2, 0.5, 0.9), Color(0.8, 0.9, 0.95), 0.13, 2}));
    s.primitives.push_back(detail::fronto_plane(
        "plane3", Vec3(0.55, 0.25, 0.6), Vec2(0.5, 0.5),
        Texture{TextureKind::noise, Color(0.1, 0.6, 0.2), Color(0.9, 0.95, 0.5), 0.08, 3}));
    s.primitives.push_back(detail::fronto_plane(
        "background", Vec3(0, 0, 1.6), Vec2(inf, inf),
        Texture{TextureKind::noise, Color(0.15, 0.1, 0.3), Color(0.85, 0.7, 0.75), 0.12, 4}));
    return s;
}

/// threeplanes plus a glossy sphere: view-dependent highlights.
inline SceneSpec specsphere_scene() {
    SceneSpec s = threeplanes_scene();
    s.name = "specsphere";
    Primitive sphere;
    sphere.kind = PrimitiveKind::sphere;
    sphere.name = "sphere";
    sphere.center = Vec3(-0.35, -0.35, 0.3);
    sphere.radius = 0.35;
    sphere.texture = Texture{TextureKind::checker, Color(0.6, 0.15, 0.5), Color(0.75, 0.35, 0.65), 0.1, 5};
    sphere.material = Material{true, 24.0, 0.8};
    s.primitives.insert(s.primitives.end() - 1, sphere);
    return s;
}

inline SceneSpec builtin_scene(const std::string& name) {
    if (name == "threeplanes") return threeplanes_scene();
    if (name == "specsphere") return specsphere_scene();
    throw ConfigError("scene.name: unknown scene '" + name + "'");
}

struct SparseDepthConfig {
    int per_view = 24;
    double noise = 0.0;        // multiplicative noise std-dev
    double percentile = 0.8;   // keep pixels with gradient magnitude at or above this quantile
};

/// Grayscale central-difference gradient magnitude.
inline std::vector<double> gradient_magnitude(const Image& img) {
    std::vector<double> g(static_cast<std::size_t>(img.width) * img.height, 0.0);
    auto lum = [&](int x, int y) {
        x = std::clamp(x, 0, img.width - 1);
        y = std::clamp(y, 0, img.height - 1);
        return mean_intensity(img.at(x, y));
    };
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double gx = 0.5 * (lum(x + 1, y) - lum(x - 1, y));
            const double gy = 0.5 * (lum(x, y + 1) - lum(x, y - 1));
            g[static_cast<std::size_t>(y) * img.width + x] = std::hypot(gx, gy);
        }
    return g;
}

/// Simulated SfM keypoints: `per_view` pixels per train view drawn uniformly
/// among pixels with valid depth and a strong image gradient.
inline std::vector<SparsePoint> sample_sparse_depth(const Dataset& data, const SparseDepthConfig& cfg,
                                                    std::uint64_t seed) {
    std::vector<SparsePoint> out;
    if (cfg.per_view <= 0) return out;
    for (int vi : data.train) {
        const CameraView& view = data.views[static_cast<std::size_t>(vi)];
        require(view.depth.has_value(), "sample_sparse_depth: ground-truth depth required");
        const auto grad = gradient_magnitude(view.image);
        std::vector<double> sorted = grad;
        std::sort(sorted.begin(), sorted.end());
        const auto qi = static_cast<std::size_t>(std::clamp(cfg.percentile, 0.0, 1.0) * (sorted.size() - 1));
        const double threshold = sorted[qi];
        std::vector<int> candidates;
        for (int y = 0; y < view.image.height; ++y)
            for (int x = 0; x < view.image.width; ++x) {
                const auto i = static_cast<std::size_t>(y) * view.image.width + x;
                if (grad[i] >= threshold && grad[i] > 0.0 && view.depth->is_valid(x, y))
                    candidates.push_back(static_cast<int>(i));
            }
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(vi)));
        const int m = std::min<int>(cfg.per_view, static_cast<int>(candidates.size()));
        // partial Fisher-Yates
        for (int k = 0; k < m; ++k) {
            const std::size_t j = k + rng.index(candidates.size() - k);
            std::swap(candidates[static_cast<std::size_t>(k)], candidates[j]);
            const int idx = candidates[static_cast<std::size_t>(k)];
            const int x = idx % view.image.width, y = idx / view.image.width;
            double z = view.depth->at(x, y);
            if (cfg.noise > 0.0) z *= 1.0 + cfg.noise * rng.normal();
            z = std::clamp(z, data.near, data.far);
            out.push_back({vi, x, y, z});
        }
    }
    return out;
}

}  // namespace snerf
