// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "simplenerf/io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun cli(const std::string& args) {
    const std::string cmd = std::string(SNERF_CLI_PATH) + " " + args + " 2>&1";
    CliRun r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) { return snerf::io::read_text(p); }

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

const char* kSmallScene =
    "--set scene.width=20 --set scene.height=20 --set scene.focal=27.5 --set scene.sparse_per_view=6";
const char* kShortTrain =
    "--set train.iterations=24 --set train.batch_rays=8 --set render.n_coarse=6 --set render.n_fine=6 "
    "--set train.hidden_layers=2 --set train.hidden_width=8 --set train.points_hidden_layers=2 "
    "--set train.points_hidden_width=8 --set train.views_hidden_layers=2 --set train.views_hidden_width=8 "
    "--set train.checkpoint_every=5";

class Cli : public ::testing::Test {
protected:
    static fs::path root;
    static fs::path data;

    static void SetUpTestSuite() {
        root = fs::temp_directory_path() / ("snerf_cli_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
        data = root / "data";
        const CliRun r = cli("make-data " + data.string() + " " + kSmallScene);
        ASSERT_EQ(r.code, 0) << r.out;
    }
    static void TearDownTestSuite() { fs::remove_all(root); }

    static CliRun train(const std::string& out, const std::string& extra) {
        return cli("train " + data.string() + " " + (root / out).string() + " " + kShortTrain + " " + extra);
    }
};

fs::path Cli::root;
fs::path Cli::data;

TEST_F(Cli, MakeDataWritesManifestAndLayout) {
    const fs::path out = root / "default";
    const CliRun r = cli("make-data " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("views      8"), std::string::npos) << r.out;
    for (int i = 0; i < 8; ++i) {
        char stem[8];
        std::snprintf(stem, sizeof stem, "%03d", i);
        EXPECT_TRUE(fs::exists(out / "images" / (std::string(stem) + ".png"))) << stem;
        EXPECT_TRUE(fs::exists(out / "depth" / (std::string(stem) + ".pfm"))) << stem;
    }
    for (const char* f : {"poses_bounds.bin", "sparse_depth.csv", "split.txt", "config.txt"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    EXPECT_GT(csv_rows(out / "sparse_depth.csv").size(), 1u);
}

TEST_F(Cli, SameSeedGivesIdenticalDepthFiles) {
    const fs::path a = root / "seed_a", b = root / "seed_b";
    ASSERT_EQ(cli("make-data " + a.string() + " --seed 7 " + kSmallScene).code, 0);
    ASSERT_EQ(cli("make-data " + b.string() + " --seed 7 " + kSmallScene).code, 0);
    for (const auto& e : fs::directory_iterator(a / "depth"))
        EXPECT_EQ(slurp(e.path()), slurp(b / "depth" / e.path().filename())) << e.path();
    EXPECT_EQ(slurp(a / "sparse_depth.csv"), slurp(b / "sparse_depth.csv"));
}

TEST_F(Cli, InvalidSceneNamesTheKey) {
    const CliRun r = cli("make-data " + (root / "bad").string() + " --set scene.plane1_depth=9");
    EXPECT_EQ(r.code, 2) << r.out;
    EXPECT_NE(r.out.find("scene.plane1_depth"), std::string::npos) << r.out;
}

TEST_F(Cli, UnknownConfigKeyIsRejectedWithLocation) {
    const fs::path conf = root / "bad.conf";
    snerf::io::write_text(conf, "[train]\niterations = 3\nlearning_rate = 1\n");
    const CliRun r = cli("make-data " + (root / "bad2").string() + " --config " + conf.string());
    EXPECT_EQ(r.code, 2) << r.out;
    EXPECT_NE(r.out.find("bad.conf:3"), std::string::npos) << r.out;
    EXPECT_EQ(cli("make-data " + (root / "bad3").string() + " --set train.nope=1").code, 2);
}

TEST_F(Cli, NonEmptyOutputNeedsForce) {
    const fs::path out = root / "occupied";
    fs::create_directories(out);
    snerf::io::write_text(out / "keep.txt", "x");
    EXPECT_EQ(cli("make-data " + out.string() + " " + kSmallScene).code, 2);
    EXPECT_TRUE(fs::exists(out / "keep.txt"));
    EXPECT_EQ(cli("make-data " + out.string() + " --force " + kSmallScene).code, 0);
    EXPECT_FALSE(fs::exists(out / "keep.txt"));
}

TEST_F(Cli, MissingDatasetIsDataError) {
    const CliRun r = cli("train " + (root / "nowhere").string() + " " + (root / "t_missing").string());
    EXPECT_EQ(r.code, 3) << r.out;
}

TEST_F(Cli, BaselinePresetLogsZeroRegularizers) {
    const CliRun r = train("t_base", "--preset dsnerf-baseline");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = csv_rows(root / "t_base" / "metrics.csv");
    ASSERT_EQ(rows.size(), 25u);
    EXPECT_EQ(rows[0][4], "L_ap");
    EXPECT_EQ(rows[0][6], "L_cfc");
    for (std::size_t i = 1; i < rows.size(); ++i)
        for (int c : {4, 5, 6}) EXPECT_EQ(std::stod(rows[i][static_cast<std::size_t>(c)]), 0.0) << i;

    ASSERT_EQ(train("t_full", "").code, 0);
    const auto full = csv_rows(root / "t_full" / "metrics.csv");
    double regs = 0.0;
    for (std::size_t i = 1; i < full.size(); ++i) regs += std::stod(full[i][4]) + std::stod(full[i][5]);
    EXPECT_GT(regs, 0.0);
}

TEST_F(Cli, ResumeMatchesUninterruptedRun) {
    ASSERT_EQ(train("t_whole", "--deterministic").code, 0);
    const CliRun first = train("t_split", "--deterministic --stop-at 12");
    ASSERT_EQ(first.code, 0) << first.out;
    EXPECT_EQ(csv_rows(root / "t_split" / "metrics.csv").size(), 13u);
    const CliRun second = train("t_split", "--deterministic --resume");
    ASSERT_EQ(second.code, 0) << second.out;
    EXPECT_EQ(slurp(root / "t_whole" / "metrics.csv"), slurp(root / "t_split" / "metrics.csv"));
    EXPECT_EQ(slurp(root / "t_whole" / "checkpoint.snrf"), slurp(root / "t_split" / "checkpoint.snrf"));
}

TEST_F(Cli, ResolvedConfigReproducesTheRun) {
    ASSERT_EQ(train("t_orig", "--preset no-cfc --seed 3").code, 0);
    const fs::path conf = root / "t_orig" / "config.txt";
    const CliRun r = cli("train " + data.string() + " " + (root / "t_again").string() + " --config " + conf.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(slurp(root / "t_orig" / "metrics.csv"), slurp(root / "t_again" / "metrics.csv"));
    EXPECT_EQ(slurp(conf), slurp(root / "t_again" / "config.txt"));
}

TEST_F(Cli, EvaluatingGroundTruthGivesPerfectSsim) {
    const fs::path out = root / "e_gt";
    const CliRun r = cli("evaluate " + data.string() + " " + data.string() + " " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = csv_rows(out / "report.csv");
    ASSERT_GE(rows.size(), 3u);
    EXPECT_EQ(rows[0][2], "ssim");
    EXPECT_EQ(rows[0][9], "coverage");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_EQ(std::stod(rows[i][2]), 1.0) << rows[i][0];
        EXPECT_EQ(rows[i][1], "inf");
        EXPECT_EQ(std::stod(rows[i][3]), 0.0);
        const double cov = std::stod(rows[i][9]);
        EXPECT_GT(cov, 0.0);
        EXPECT_LE(cov, 1.0);
    }
}

TEST_F(Cli, EvaluateRenderAndMaskWriteOutputs) {
    ASSERT_EQ(train("t_eval", "").code, 0);
    const fs::path ckpt = root / "t_eval" / "checkpoint.snrf";
    const fs::path ev = root / "e_model";
    const CliRun r = cli("evaluate " + ckpt.string() + " " + data.string() + " " + ev.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("masked:"), std::string::npos);
    for (const char* f : {"001.png", "001_depth.pfm", "001_mask.png", "report.csv", "config.txt"})
        EXPECT_TRUE(fs::exists(ev / f)) << f;

    const fs::path rd = root / "r_model";
    ASSERT_EQ(cli("render " + ckpt.string() + " " + data.string() + " " + rd.string() + " --views train").code, 0);
    EXPECT_TRUE(fs::exists(rd / "000.png"));
    EXPECT_TRUE(fs::exists(rd / "000_depth.pfm"));

    const fs::path mk = root / "m_model";
    const CliRun m = cli("mask " + data.string() + " " + mk.string() + " --checkpoint " + ckpt.string());
    ASSERT_EQ(m.code, 0) << m.out;
    EXPECT_TRUE(fs::exists(mk / "001_visibility.png"));
    EXPECT_TRUE(fs::exists(mk / "000_m_ap.png"));
    EXPECT_TRUE(fs::exists(mk / "000_m_cfc.png"));

    EXPECT_EQ(cli("evaluate " + (root / "none.snrf").string() + " " + data.string() + " " + (root / "e2").string()).code,
              3);
}

TEST_F(Cli, GradCheckExitCodes) {
    const CliRun ok = cli("grad-check");
    EXPECT_EQ(ok.code, 0) << ok.out;
    EXPECT_NE(ok.out.find("losses/cfc"), std::string::npos);
    EXPECT_NE(ok.out.find("PASS"), std::string::npos);
    const CliRun bad = cli("grad-check --inject-fault cos-sign");
    EXPECT_EQ(bad.code, 4) << bad.out;
    EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("train").code, 2);
    EXPECT_EQ(cli("frobnicate").code, 2);
}

}  // namespace
