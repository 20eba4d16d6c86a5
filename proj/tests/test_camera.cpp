// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "simplenerf/camera.hpp"
#include "simplenerf/image.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace snerf {
namespace {

Intrinsics k100() { return Intrinsics{100, 100, 50, 50, 100, 100}; }

Pose random_pose(Rng& rng) {
    const Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    return Pose::from(q.normalized().toRotationMatrix(), Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
}

TEST(GenerateRay, PrincipalPointIsOpticalAxis) {
    const Ray r = generate_ray(k100(), Pose::identity(), Vec2(50, 50));
    EXPECT_NEAR((r.direction - Vec3(0, 0, 1)).norm(), 0.0, 1e-15);
    EXPECT_EQ(r.origin, Vec3::Zero());
}

TEST(GenerateRay, OffAxisPixelMatchesPinholeOracle) {
    const Intrinsics wide{100, 100, 50, 50, 200, 100};
    const Ray r = generate_ray(wide, Pose::identity(), Vec2(150, 50));
    const double h = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(r.direction.x(), h, 1e-12);
    EXPECT_NEAR(r.direction.y(), 0.0, 1e-12);
    EXPECT_NEAR(r.direction.z(), h, 1e-12);
    EXPECT_NEAR(r.direction.x(), 0.7071, 1e-4);
}

TEST(GenerateRay, RejectsOutOfBoundsPixel) {
    Intrinsics k = k100();
    EXPECT_THROW(generate_ray(k, Pose::identity(), Vec2(-0.1, 10)), std::invalid_argument);
    EXPECT_THROW(generate_ray(k, Pose::identity(), Vec2(10, 100.5)), std::invalid_argument);
}

TEST(GenerateRay, DirectionsAreUnit) {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const Ray r = generate_ray(k100(), random_pose(rng), Vec2(rng.uniform(0, 100), rng.uniform(0, 100)));
        EXPECT_NEAR(r.direction.norm(), 1.0, 1e-12);
    }
}

TEST(PointAtDistance, Basics) {
    EXPECT_THROW(point_at_distance(Ray{}, 0.0), std::invalid_argument);
    EXPECT_EQ(point_at_distance(Ray{}, 2.0), Vec3(0, 0, 2));
    const Ray r{Vec3(1, -2, 0.5), Vec3(2, 3, 6) / 7.0};
    const Vec3 p = point_at_distance(r, 1.5);
    EXPECT_DOUBLE_EQ(p.x(), 1.0 + 1.5 * 2.0 / 7.0);
    EXPECT_DOUBLE_EQ(p.y(), -2.0 + 1.5 * 3.0 / 7.0);
    EXPECT_DOUBLE_EQ(p.z(), 0.5 + 1.5 * 6.0 / 7.0);
}

TEST(Reproject, IdentityKeepsPixelAndDistance) {
    const Camera cam{k100(), Pose::look_at(Vec3(0.2, 0.1, -3), Vec3(0, 0, 0))};
    const auto p = reproject(Vec2(33.3, 71.2), 2.7, cam, cam);
    ASSERT_TRUE(p);
    EXPECT_NEAR((p->pixel - Vec2(33.3, 71.2)).norm(), 0.0, 1e-9);
    EXPECT_NEAR(p->distance, 2.7, 1e-12);
}

TEST(Reproject, FrontoParallelDisparity) {
    // Plane at optical-axis depth 2; the destination is shifted by 0.1 along x.
    const Camera src{k100(), Pose::identity()};
    const Camera dst{k100(), Pose::from(Mat3::Identity(), Vec3(0.1, 0, 0))};
    const Vec2 q(70.0, 40.0);
    const Ray ray = generate_ray(src, q);
    const double s = 2.0 / ray.direction.z();
    const auto p = reproject(q, s, src, dst);
    ASSERT_TRUE(p);
    EXPECT_NEAR(q.x() - p->pixel.x(), 5.0, 1e-9);
    EXPECT_NEAR(p->pixel.y(), q.y(), 1e-9);
}

TEST(Reproject, BehindCameraIsInvalid) {
    const Camera src{k100(), Pose::identity()};
    const Camera dst{k100(), Pose::from(Mat3::Identity(), Vec3(0, 0, 5))};
    EXPECT_FALSE(reproject(Vec2(50, 50), 2.0, src, dst).has_value());
}

TEST(Reproject, RoundTripProperty) {
    Rng rng(11);
    int checked = 0;
    for (int i = 0; i < 2000; ++i) {
        const Camera a{k100(), random_pose(rng)};
        const Camera b{k100(), random_pose(rng)};
        const Vec2 q(rng.uniform(0, 100), rng.uniform(0, 100));
        const double s = rng.uniform(0.5, 6.0);
        const auto fwd = reproject(q, s, a, b);
        if (!fwd) continue;
        const auto back = reproject(fwd->pixel, fwd->distance, b, a);
        ASSERT_TRUE(back);
        EXPECT_LT((back->pixel - q).norm(), 1e-6);
        EXPECT_NEAR(back->distance, s, 1e-9);
        ++checked;
    }
    EXPECT_GT(checked, 500);
}

TEST(Reproject, RayThenProjectRecoversPixel) {
    Rng rng(12);
    for (int i = 0; i < 500; ++i) {
        const Camera cam{k100(), random_pose(rng)};
        const Vec2 q(rng.uniform(0, 100), rng.uniform(0, 100));
        const auto p = project(cam, point_at_distance(generate_ray(cam, q), rng.uniform(0.1, 10)));
        ASSERT_TRUE(p);
        EXPECT_LT((p->pixel - q).norm(), 1e-6);
    }
}

TEST(Pose, ConstructorsStayOrthonormal) {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const Vec3 eye(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-4, -2));
        const Pose p = Pose::look_at(eye, Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), 0));
        EXPECT_LT((p.rotation.transpose() * p.rotation - Mat3::Identity()).norm(), 1e-12);
        EXPECT_NEAR(p.rotation.determinant(), 1.0, 1e-12);
    }
    Mat3 bad = Mat3::Identity();
    bad(0, 0) = -1.0;
    EXPECT_THROW(Pose::from(bad, Vec3::Zero()), std::invalid_argument);
    bad = Mat3::Identity() * 1.01;
    EXPECT_THROW(Pose::from(bad, Vec3::Zero()), std::invalid_argument);
}

TEST(Intrinsics, Validation) {
    EXPECT_THROW((Intrinsics{0, 1, 1, 1, 4, 4}.validate()), std::invalid_argument);
    EXPECT_THROW((Intrinsics{1, 1, 4, 1, 4, 4}.validate()), std::invalid_argument);
    EXPECT_NO_THROW((Intrinsics{1, 1, 3.9, 0, 4, 4}.validate()));
}

TEST(Bilinear, IntegerCoordinatesAreExact) {
    Image img(4, 3);
    Rng rng(5);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x) img.set(x, y, Color(rng.uniform(), rng.uniform(), rng.uniform()));
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x) {
            const auto c = bilinear_sample(img, Vec2(x + 0.5, y + 0.5));
            ASSERT_TRUE(c);
            EXPECT_EQ(*c, img.at(x, y));
        }
}

TEST(Bilinear, MidpointAndBounds) {
    Image img(2, 1);
    img.set(0, 0, Color(0, 0, 0));
    img.set(1, 0, Color(1, 1, 1));
    const auto c = bilinear_sample(img, Vec2(1.0, 0.5));
    ASSERT_TRUE(c);
    EXPECT_DOUBLE_EQ((*c)(0), 0.5);
    Image big(8, 8);
    EXPECT_FALSE(bilinear_sample(big, Vec2(-0.5, 3)).has_value());
    EXPECT_FALSE(bilinear_sample(big, Vec2(8.2, 3)).has_value());
}

}  // namespace
}  // namespace snerf
