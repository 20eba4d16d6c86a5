// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/camera.hpp"
#include "simplenerf/common.hpp"
#include "simplenerf/image.hpp"
#include "simplenerf/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

// On-disk layout of a dataset directory:
//
//   images/NNN.png      8-bit RGB
//   depth/NNN.pfm       ground-truth along-ray depth (optional)
//   poses_bounds.bin    17 little-endian f64 per view
//   sparse_depth.csv    view,x,y,depth (optional)
//   split.txt           "train: i j ..." / "test: k l ..." (optional)
//
// Each poses_bounds record is a row-major 3x5 matrix followed by near and far.
// The first three columns are the camera axes in LLFF order [down, right,
// back], the fourth is the camera center, the fifth is [height, width, focal].

namespace snerf {

struct CameraView {
    Camera camera;
    Image image;
    std::optional<DepthMap> depth;
};

struct SparsePoint {
    int view = 0;
    int x = 0;
    int y = 0;
    double depth = 0.0;
};

struct Dataset {
    std::string name;
    std::vector<CameraView> views;
    std::vector<SparsePoint> sparse;
    std::vector<int> train;
    std::vector<int> test;
    double near = 0.0;
    double far = 0.0;

    std::vector<Pose> train_poses() const {
        std::vector<Pose> poses;
        for (int i : train) poses.push_back(views[static_cast<std::size_t>(i)].camera.pose);
        return poses;
    }

    void validate() const {
        for (int i : train) require(i >= 0 && static_cast<std::size_t>(i) < views.size(), "dataset: bad train index");
        for (int i : test) require(i >= 0 && static_cast<std::size_t>(i) < views.size(), "dataset: bad test index");
        for (const auto& p : sparse) {
            require(p.view >= 0 && static_cast<std::size_t>(p.view) < views.size(), "dataset: sparse view index");
            const auto& img = views[static_cast<std::size_t>(p.view)].image;
            require(img.contains(p.x, p.y), "dataset: sparse depth pixel out of bounds");
            require(p.depth >= near && p.depth <= far, "dataset: sparse depth outside [near, far]");
        }
    }
};

/// Every 8th frame is held out for testing; `n_train` views are spread
/// uniformly over the remaining frames.
inline void protocol_split(std::size_t count, int n_train, std::vector<int>& train, std::vector<int>& test) {
    train.clear();
    test.clear();
    std::vector<int> rest;
    for (std::size_t i = 0; i < count; ++i) {
        if (i % 8 == 0)
            test.push_back(static_cast<int>(i));
        else
            rest.push_back(static_cast<int>(i));
    }
    if (rest.empty() || n_train <= 0) return;
    const int n = std::min<int>(n_train, static_cast<int>(rest.size()));
    for (int k = 0; k < n; ++k) {
        const double pos = n == 1 ? 0.0 : static_cast<double>(k) * (rest.size() - 1) / (n - 1);
        train.push_back(rest[static_cast<std::size_t>(std::lround(pos))]);
    }
}

namespace detail {

inline std::string view_stem(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03zu", i);
    return buf;
}

inline std::string index_list(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s;
}

inline std::vector<int> parse_index_list(const std::string& text) {
    std::istringstream ss(text);
    std::vector<int> out;
    int v = 0;
    while (ss >> v) out.push_back(v);
    return out;
}

}  // namespace detail

inline std::vector<double> encode_pose_record(const Camera& cam, double near, double far) {
    const Mat3& r = cam.pose.rotation;
    const Vec3 down = r.col(1), right = r.col(0), back = -r.col(2);
    const Vec3& t = cam.pose.translation;
    std::vector<double> rec(17);
    for (int row = 0; row < 3; ++row) {
        rec[static_cast<std::size_t>(row * 5 + 0)] = down[row];
        rec[static_cast<std::size_t>(row * 5 + 1)] = right[row];
        rec[static_cast<std::size_t>(row * 5 + 2)] = back[row];
        rec[static_cast<std::size_t>(row * 5 + 3)] = t[row];
    }
    rec[4] = cam.intrinsics.height;
    rec[9] = cam.intrinsics.width;
    rec[14] = cam.intrinsics.fx;
    rec[15] = near;
    rec[16] = far;
    return rec;
}

inline Camera decode_pose_record(const double* rec) {
    Mat3 r;
    Vec3 t;
    for (int row = 0; row < 3; ++row) {
        r(row, 1) = rec[row * 5 + 0];
        r(row, 0) = rec[row * 5 + 1];
        r(row, 2) = -rec[row * 5 + 2];
        t[row] = rec[row * 5 + 3];
    }
    const int h = static_cast<int>(std::lround(rec[4]));
    const int w = static_cast<int>(std::lround(rec[9]));
    Camera cam;
    cam.intrinsics = Intrinsics::centered(w, h, rec[14]);
    cam.pose = Pose::from(r, t);
    return cam;
}

inline void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    std::ofstream poses(dir / "poses_bounds.bin", std::ios::binary);
    if (!poses) throw DataError("cannot write '" + (dir / "poses_bounds.bin").string() + "'");
    for (std::size_t i = 0; i < data.views.size(); ++i) {
        const auto& v = data.views[i];
        io::write_png(dir / "images" / (detail::view_stem(i) + ".png"), v.image);
        if (v.depth) {
            fs::create_directories(dir / "depth");
            io::write_pfm(dir / "depth" / (detail::view_stem(i) + ".pfm"), *v.depth);
        }
        const auto rec = encode_pose_record(v.camera, data.near, data.far);
        poses.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size() * sizeof(double)));
    }
    std::string csv = "view,x,y,depth\n";
    for (const auto& p : data.sparse)
        csv += std::to_string(p.view) + "," + std::to_string(p.x) + "," + std::to_string(p.y) + "," +
               io::fmt_double(p.depth) + "\n";
    io::write_text(dir / "sparse_depth.csv", csv);
    io::write_text(dir / "split.txt",
                   "train: " + detail::index_list(data.train) + "\ntest: " + detail::index_list(data.test) + "\n");
}

/// Loads a dataset directory. Without split.txt the held-out protocol split
/// is used with `n_train` training views.
inline Dataset load_llff(const std::filesystem::path& dir, int n_train = 2) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> images;
    if (fs::is_directory(dir / "images"))
        for (const auto& e : fs::directory_iterator(dir / "images"))
            if (e.path().extension() == ".png") images.push_back(e.path());
    std::sort(images.begin(), images.end());
    if (images.empty()) throw DataError("no PNG images in '" + (dir / "images").string() + "'");

    const fs::path pose_path = dir / "poses_bounds.bin";
    if (!fs::exists(pose_path)) throw DataError("missing '" + pose_path.string() + "'");
    const auto bytes = fs::file_size(pose_path);
    if (bytes % (17 * sizeof(double)) != 0)
        throw DataError("'" + pose_path.string() + "' is not a whole number of 17 x f64 records");
    const std::size_t count = bytes / (17 * sizeof(double));
    if (count != images.size())
        throw DataError("'" + pose_path.string() + "' has " + std::to_string(count) + " records but " +
                        std::to_string(images.size()) + " images were found");
    std::vector<double> recs(count * 17);
    {
        std::ifstream in(pose_path, std::ios::binary);
        in.read(reinterpret_cast<char*>(recs.data()), static_cast<std::streamsize>(bytes));
        if (!in) throw DataError("failed to read '" + pose_path.string() + "'");
    }

    Dataset data;
    data.name = dir.filename().string();
    data.near = std::numeric_limits<double>::infinity();
    data.far = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double* rec = recs.data() + 17 * i;
        CameraView v;
        try {
            v.camera = decode_pose_record(rec);
        } catch (const std::invalid_argument& e) {
            throw DataError("bad pose record " + std::to_string(i) + " in '" + pose_path.string() + "': " + e.what());
        }
        v.image = io::read_png(images[i]);
        if (v.image.width != v.camera.intrinsics.width || v.image.height != v.camera.intrinsics.height)
            throw DataError("image '" + images[i].string() + "' size disagrees with its pose record");
        const fs::path dpath = dir / "depth" / (images[i].stem().string() + ".pfm");
        if (fs::exists(dpath)) v.depth = io::read_pfm(dpath);
        data.near = std::min(data.near, rec[15]);
        data.far = std::max(data.far, rec[16]);
        data.views.push_back(std::move(v));
    }
    if (!(data.near > 0.0 && data.near < data.far)) throw DataError("invalid near/far bounds in '" + pose_path.string() + "'");

    const fs::path split_path = dir / "split.txt";
    if (fs::exists(split_path)) {
        std::istringstream ss(io::read_text(split_path));
        std::string line;
        while (std::getline(ss, line)) {
            const auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            const std::string key = line.substr(0, colon);
            if (key == "train") data.train = detail::parse_index_list(line.substr(colon + 1));
            else if (key == "test") data.test = detail::parse_index_list(line.substr(colon + 1));
        }
    } else {
        protocol_split(count, n_train, data.train, data.test);
    }

    const fs::path sparse_path = dir / "sparse_depth.csv";
    if (fs::exists(sparse_path)) {
        std::istringstream ss(io::read_text(sparse_path));
        std::string line;
        std::getline(ss, line);
        int lineno = 1;
        while (std::getline(ss, line)) {
            ++lineno;
            if (line.empty()) continue;
            SparsePoint p;
            char c1 = 0, c2 = 0, c3 = 0;
            std::istringstream ls(line);
            if (!(ls >> p.view >> c1 >> p.x >> c2 >> p.y >> c3 >> p.depth) || c1 != ',' || c2 != ',' || c3 != ',')
                throw DataError("malformed row " + std::to_string(lineno) + " in '" + sparse_path.string() + "'");
            data.sparse.push_back(p);
        }
    }
    try {
        data.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError("dataset '" + dir.string() + "': " + e.what());
    }
    return data;
}

}  // namespace snerf
