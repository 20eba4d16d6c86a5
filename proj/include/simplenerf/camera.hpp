// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/common.hpp"
#include "simplenerf/image.hpp"

#include <Eigen/Geometry>

#include <optional>
#include <span>

// Camera frame: x right, y down, the camera looks along +z. Pixel (i, j) has
// its center at continuous coordinate (i + 0.5, j + 0.5). Every depth in this
// library is an along-ray distance from the camera center.

namespace snerf {

struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    void validate() const {
        require(fx > 0.0 && fy > 0.0, "intrinsics: focal lengths must be positive");
        require(width > 0 && height > 0, "intrinsics: image size must be positive");
        require(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height,
                "intrinsics: principal point outside the image");
    }

    /// Square pixels with the principal point at the image center.
    static Intrinsics centered(int width, int height, double focal) {
        Intrinsics k{focal, focal, 0.5 * width, 0.5 * height, width, height};
        k.validate();
        return k;
    }
};

/// Camera-to-world rigid transform. `translation` is the camera center.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static constexpr double kOrthonormalTol = 1e-6;

    static Pose identity() { return {}; }

    /// Validating constructor.
    static Pose from(const Mat3& rotation, const Vec3& translation) {
        const double ortho_err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
        require(ortho_err <= kOrthonormalTol, "pose: rotation is not orthonormal");
        require(std::abs(rotation.determinant() - 1.0) <= kOrthonormalTol, "pose: rotation determinant is not +1");
        require(translation.allFinite(), "pose: non-finite translation");
        return Pose{rotation, translation};
    }

    /// Camera at `eye` looking at `target`; `up` is the world up direction
    /// (the camera's y axis points opposite to it).
    static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, -1, 0)) {
        const Vec3 forward = (target - eye).normalized();
        const Vec3 right = forward.cross(up).normalized();
        const Vec3 down = forward.cross(right);
        Mat3 r;
        r.col(0) = right;
        r.col(1) = down;
        r.col(2) = forward;
        return from(r, eye);
    }

    const Vec3& center() const { return translation; }

    Vec3 to_camera(const Vec3& world) const { return rotation.transpose() * (world - translation); }
    Vec3 to_world(const Vec3& cam) const { return rotation * cam + translation; }
};

struct Camera {
    Intrinsics intrinsics;
    Pose pose;
};

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3(0, 0, 1);

    Vec3 at(double s) const { return origin + s * direction; }
};

namespace detail {

inline Ray ray_through(const Intrinsics& k, const Pose& pose, const Vec2& pixel) {
    const Vec3 cam((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, 1.0);
    return Ray{pose.translation, (pose.rotation * cam).normalized()};
}

}  // namespace detail

/// World-space ray through a continuous pixel coordinate.
inline Ray generate_ray(const Intrinsics& k, const Pose& pose, const Vec2& pixel) {
    require(pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= k.width && pixel.y() <= k.height,
            "generate_ray: pixel outside the image");
    return detail::ray_through(k, pose, pixel);
}

inline Ray generate_ray(const Camera& cam, const Vec2& pixel) {
    return generate_ray(cam.intrinsics, cam.pose, pixel);
}

/// Ray through the center of integer pixel (x, y).
inline Ray pixel_ray(const Camera& cam, int x, int y) {
    return generate_ray(cam, Vec2(x + 0.5, y + 0.5));
}

inline Vec3 point_at_distance(const Ray& ray, double s) {
    require(s > 0.0, "point_at_distance: distance must be positive");
    return ray.at(s);
}

struct Projection {
    Vec2 pixel;
    double distance;  // along-ray distance from the camera center
};

/// Projects a world point; nullopt when it is not strictly in front of the camera.
inline std::optional<Projection> project(const Intrinsics& k, const Pose& pose, const Vec3& world) {
    const Vec3 p = pose.to_camera(world);
    if (!(p.z() > 0.0)) return std::nullopt;
    return Projection{Vec2(k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy), p.norm()};
}

inline std::optional<Projection> project(const Camera& cam, const Vec3& world) {
    return project(cam.intrinsics, cam.pose, world);
}

/// Lifts `pixel` in `src` to along-ray distance `s` and projects it into `dst`.
/// Points behind `dst` come back as nullopt; bounds are left to the caller.
inline std::optional<Projection> reproject(const Vec2& pixel, double s, const Camera& src, const Camera& dst) {
    require(s > 0.0, "reproject: distance must be positive");
    const Ray ray = detail::ray_through(src.intrinsics, src.pose, pixel);
    return project(dst, ray.at(s));
}

inline bool in_bounds(const Intrinsics& k, const Vec2& xy) {
    return xy.x() >= 0.0 && xy.y() >= 0.0 && xy.x() < k.width && xy.y() < k.height;
}

}  // namespace snerf
