// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "simplenerf/dataset.hpp"
#include "simplenerf/io.hpp"
#include "simplenerf/pipeline.hpp"
#include "simplenerf/scene.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

namespace snerf {
namespace {

namespace fs = std::filesystem;
constexpr double kInf = std::numeric_limits<double>::infinity();

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("snerf_scene_" + name);
    fs::remove_all(p);
    return p;
}

SceneSpec single_plane(double z, Texture tex, int views = 2, double radius = 0.0) {
    SceneSpec s;
    s.name = "plane";
    s.width = 24;
    s.height = 20;
    s.focal = 30.0;
    s.ring.count = views;
    s.ring.radius = radius;
    s.ring.look_at = Vec3(0, 0, z);
    s.train_views = 1;
    s.primitives.push_back(detail::fronto_plane("background", Vec3(0, 0, z), Vec2(kInf, kInf), tex));
    return s;
}

TEST(GenerateScene, FrontoPlaneDepthOracle) {
    const SceneSpec s = single_plane(0.5, Texture{});
    const Dataset d = generate_scene(s, 0);
    const double axial = 0.5 - s.ring.center.z();
    const Camera& cam = d.views[0].camera;
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            const Ray r = pixel_ray(cam, x, y);
            const double cos_angle = r.direction.dot(Vec3(0, 0, 1));
            ASSERT_NEAR(d.views[0].depth->at(x, y), axial / cos_angle, 1e-12);
        }
}

TEST(GenerateScene, IdenticalPosesGiveIdenticalImages) {
    const Dataset d = generate_scene(single_plane(0.5, Texture{TextureKind::noise, Color(0, 0, 0), Color(1, 1, 1), 0.2, 3}), 4);
    EXPECT_EQ(d.views[0].image.rgb, d.views[1].image.rgb);
}

TEST(GenerateScene, DeterministicGivenSeed) {
    SceneConfig c;
    c.width = c.height = 16;
    c.focal = 22.0;
    const Dataset a = generate_scene(c.spec(), 5), b = generate_scene(c.spec(), 5), e = generate_scene(c.spec(), 6);
    for (std::size_t i = 0; i < a.views.size(); ++i) {
        EXPECT_EQ(a.views[i].image.rgb, b.views[i].image.rgb);
        EXPECT_EQ(a.views[i].depth->depth, b.views[i].depth->depth);
    }
    EXPECT_NE(a.views[0].image.rgb, e.views[0].image.rgb);
}

TEST(GenerateScene, DefaultSplitAndBounds) {
    SceneConfig c;
    c.width = c.height = 16;
    c.focal = 22.0;
    const Dataset d = generate_scene(c.spec(), 0);
    EXPECT_EQ(d.train, (std::vector<int>{0, 4}));
    EXPECT_EQ(d.test, (std::vector<int>{1, 2, 3, 5, 6, 7}));
    for (const auto& v : d.views)
        for (std::size_t i = 0; i < v.depth->depth.size(); ++i) {
            ASSERT_TRUE(v.depth->valid[i]);
            ASSERT_GT(v.depth->depth[i], d.near);
            ASSERT_LT(v.depth->depth[i], d.far);
        }
}

TEST(GenerateScene, RejectsGeometryOutsideBounds) {
    SceneConfig c;
    c.far = 7.0;  // far rays leave the encoding box
    EXPECT_THROW(generate_scene(c.spec(), 0), ConfigError);
    SceneConfig p;
    p.plane_depth["plane2"] = 0.5;
    try {
        generate_scene(p.spec(), 0);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("scene.plane2_depth"), std::string::npos);
    }
    SceneConfig q;
    q.plane_depth["nosuch"] = 2.0;
    EXPECT_THROW(q.spec(), ConfigError);
}

TEST(GenerateScene, SampledPointsStayInsideEncodingBox) {
    SceneConfig c;
    const SceneSpec s = c.spec();
    for (const auto& cam : ring_cameras(s))
        for (int y = 0; y < s.height; y += 3)
            for (int x = 0; x < s.width; x += 3)
                for (double t = 0.0; t <= 1.0; t += 0.125) {
                    const Vec3 p = pixel_ray(cam, x, y).at(s.near + t * (s.far - s.near));
                    ASSERT_LE(p.cwiseAbs().maxCoeff(), std::numbers::pi);
                }
}

// Every pixel seen from both views of a Lambertian scene must reproject onto
// the same color. The built-in geometry is kept but its textures are swapped
// for smooth noise: bilinear lookups across hard checker edges would measure
// interpolation error rather than depth consistency.
TEST(GenerateScene, ReprojectionIsPhotometricallyConsistent) {
    SceneSpec spec = SceneConfig{}.spec();
    for (auto& p : spec.primitives) {
        p.texture.kind = TextureKind::noise;
        p.texture.scale = 0.3;
    }
    const Dataset d = generate_scene(spec, 0);
    for (std::size_t i = 0; i < d.views.size(); ++i)
        for (std::size_t j = 0; j < d.views.size(); ++j) {
            if (i == j) continue;
            const auto& src = d.views[i];
            const auto& dst = d.views[j];
            double sum = 0.0;
            int count = 0;
            for (int y = 0; y < src.image.height; ++y)
                for (int x = 0; x < src.image.width; ++x) {
                    const auto proj = reproject(Vec2(x + 0.5, y + 0.5), src.depth->at(x, y), src.camera, dst.camera);
                    if (!proj) continue;
                    const int px = static_cast<int>(std::floor(proj->pixel.x()));
                    const int py = static_cast<int>(std::floor(proj->pixel.y()));
                    if (!dst.image.contains(px, py)) continue;
                    if (std::abs(dst.depth->at(px, py) - proj->distance) > 1e-2) continue;  // occluded
                    const auto sampled = bilinear_sample(dst.image, proj->pixel);
                    if (!sampled) continue;
                    sum += (*sampled - src.image.at(x, y)).squaredNorm() / 3.0;
                    ++count;
                }
            ASSERT_GT(count, 1000);
            EXPECT_LT(sum / count, 1e-3) << i << "->" << j;
        }
}

Dataset checker_scene() {
    SceneSpec s = single_plane(0.8, Texture{TextureKind::checker, Color(0.1, 0.1, 0.1), Color(0.9, 0.9, 0.9), 0.25, 0}, 4, 0.3);
    s.width = s.height = 48;
    s.focal = 60.0;
    s.train_views = 2;
    return generate_scene(s, 0);
}

TEST(SparseDepth, NoiselessKeypointsMatchGroundTruth) {
    const Dataset d = checker_scene();
    const auto pts = sample_sparse_depth(d, SparseDepthConfig{20, 0.0, 0.8}, 1);
    ASSERT_EQ(pts.size(), 40u);
    for (const auto& p : pts) EXPECT_EQ(p.depth, d.views[static_cast<std::size_t>(p.view)].depth->at(p.x, p.y));
}

TEST(SparseDepth, ZeroPerViewIsEmpty) {
    EXPECT_TRUE(sample_sparse_depth(checker_scene(), SparseDepthConfig{0, 0.0, 0.8}, 1).empty());
}

TEST(SparseDepth, NoisyKeypointsStayInBounds) {
    const Dataset d = checker_scene();
    for (const auto& p : sample_sparse_depth(d, SparseDepthConfig{20, 0.5, 0.8}, 2)) {
        EXPECT_GE(p.depth, d.near);
        EXPECT_LE(p.depth, d.far);
    }
}

TEST(SparseDepth, KeypointsConcentrateOnEdges) {
    const Dataset d = checker_scene();
    const auto pts = sample_sparse_depth(d, SparseDepthConfig{40, 0.0, 0.8}, 3);
    int near_edge = 0;
    for (const auto& p : pts) {
        const Image& img = d.views[static_cast<std::size_t>(p.view)].image;
        // Within 2 px of an albedo edge: the 5x5 window is not uniform.
        bool edge = false;
        for (int dy = -2; dy <= 2 && !edge; ++dy)
            for (int dx = -2; dx <= 2 && !edge; ++dx)
                if (img.contains(p.x + dx, p.y + dy) && (img.at(p.x + dx, p.y + dy) - img.at(p.x, p.y)).norm() > 1e-3)
                    edge = true;
        near_edge += edge ? 1 : 0;
    }
    EXPECT_GE(near_edge, static_cast<int>(0.8 * pts.size()));
}

TEST(ProtocolSplit, EveryEighthFrameIsHeldOut) {
    std::vector<int> train, test;
    protocol_split(16, 3, train, test);
    EXPECT_EQ(test, (std::vector<int>{0, 8}));
    EXPECT_EQ(train.size(), 3u);
    EXPECT_EQ(train.front(), 1);
    EXPECT_EQ(train.back(), 15);
    for (int t : train) EXPECT_NE(t % 8, 0);
}

TEST(PoseRecord, RoundTrip) {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        Camera cam;
        cam.intrinsics = Intrinsics::centered(40, 30, rng.uniform(20, 80));
        cam.pose = Pose::look_at(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), -3), Vec3(0, 0, rng.uniform(0, 1)));
        const auto rec = encode_pose_record(cam, 1.0, 5.0);
        const Camera back = decode_pose_record(rec.data());
        EXPECT_LT((back.pose.rotation - cam.pose.rotation).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((back.pose.translation - cam.pose.translation).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_EQ(back.intrinsics.width, 40);
        EXPECT_EQ(back.intrinsics.height, 30);
        EXPECT_NEAR(back.intrinsics.fx, cam.intrinsics.fx, 1e-12);
    }
}

TEST(LoadLlff, SyntheticRoundTrip) {
    SceneConfig c;
    c.width = c.height = 16;
    c.focal = 22.0;
    const Dataset d = make_synthetic(c);
    const fs::path dir = scratch("roundtrip");
    write_dataset(dir, d);
    const Dataset back = load_llff(dir);
    ASSERT_EQ(back.views.size(), d.views.size());
    EXPECT_EQ(back.train, d.train);
    EXPECT_EQ(back.test, d.test);
    EXPECT_DOUBLE_EQ(back.near, d.near);
    EXPECT_DOUBLE_EQ(back.far, d.far);
    for (std::size_t i = 0; i < d.views.size(); ++i) {
        const auto& a = d.views[i].camera;
        const auto& b = back.views[i].camera;
        EXPECT_LT((a.pose.rotation - b.pose.rotation).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((a.pose.translation - b.pose.translation).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_NEAR(a.intrinsics.fx, b.intrinsics.fx, 1e-9);
        EXPECT_NEAR(a.intrinsics.cx, b.intrinsics.cx, 1e-9);
        ASSERT_TRUE(back.views[i].depth.has_value());
        for (std::size_t k = 0; k < a.intrinsics.width * static_cast<std::size_t>(a.intrinsics.height); ++k)
            EXPECT_NEAR(back.views[i].depth->depth[k], d.views[i].depth->depth[k], 1e-6 * d.views[i].depth->depth[k]);
        for (std::size_t k = 0; k < d.views[i].image.rgb.size(); ++k)
            EXPECT_NEAR(back.views[i].image.rgb[k], d.views[i].image.rgb[k], 0.5 / 255.0 + 1e-12);
    }
    ASSERT_EQ(back.sparse.size(), d.sparse.size());
    for (std::size_t i = 0; i < d.sparse.size(); ++i) EXPECT_EQ(back.sparse[i].depth, d.sparse[i].depth);
    fs::remove_all(dir);
}

TEST(LoadLlff, ProtocolSplitWithoutSplitFile) {
    SceneConfig c;
    c.width = c.height = 8;
    c.focal = 11.0;
    c.views = 16;
    const fs::path dir = scratch("split16");
    write_dataset(dir, generate_scene(c.spec(), 0));
    fs::remove(dir / "split.txt");
    const Dataset back = load_llff(dir, 2);
    EXPECT_EQ(back.test, (std::vector<int>{0, 8}));
    EXPECT_EQ(back.train.size(), 2u);
    fs::remove_all(dir);
}

TEST(LoadLlff, StructuredErrors) {
    SceneConfig c;
    c.width = c.height = 8;
    c.focal = 11.0;
    const fs::path dir = scratch("broken");
    write_dataset(dir, generate_scene(c.spec(), 0));
    fs::resize_file(dir / "poses_bounds.bin", fs::file_size(dir / "poses_bounds.bin") - 8);
    EXPECT_THROW(load_llff(dir), DataError);
    fs::resize_file(dir / "poses_bounds.bin", 17 * 8 * 3);
    EXPECT_THROW(load_llff(dir), DataError);
    EXPECT_THROW(load_llff(dir / "nope"), DataError);
    fs::remove_all(dir);
}

TEST(Io, PfmRoundTripAndInvalidPixels) {
    DepthMap m(5, 3);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 5; ++x)
            if ((x + y) % 3) m.set(x, y, 1.0 + 0.25 * x + y);
    const fs::path dir = scratch("pfm");
    fs::create_directories(dir);
    io::write_pfm(dir / "d.pfm", m);
    const DepthMap back = io::read_pfm(dir / "d.pfm");
    EXPECT_EQ(back.valid, m.valid);
    for (std::size_t i = 0; i < m.depth.size(); ++i)
        if (m.valid[i]) {
            EXPECT_EQ(back.depth[i], m.depth[i]);
        }
    std::ofstream(dir / "bad.pfm") << "P5\n1 1\n";
    EXPECT_THROW(io::read_pfm(dir / "bad.pfm"), DataError);
    fs::remove_all(dir);
}

TEST(Io, PngRoundTripIsByteExact) {
    Image img(7, 4);
    Rng rng(2);
    for (double& v : img.rgb) v = std::round(rng.uniform() * 255.0) / 255.0;
    const fs::path dir = scratch("png");
    fs::create_directories(dir);
    io::write_png(dir / "a.png", img);
    EXPECT_EQ(io::read_png(dir / "a.png").rgb, img.rgb);
    EXPECT_THROW(io::read_png(dir / "missing.png"), DataError);
    fs::remove_all(dir);
}

}  // namespace
}  // namespace snerf
