// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "simplenerf/config.hpp"

#include <gtest/gtest.h>

namespace snerf {
namespace {

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

TEST(Config, ParsesSectionsCommentsAndWhitespace) {
    RunConfig c;
    parse_config(c,
                 "# header\n"
                 "[scene]\n"
                 "  width = 48   # trailing comment\n"
                 "plane2_depth = 2.5\n"
                 "\n"
                 "[train]\n"
                 "iterations=1234\n"
                 "points_variant = main\n"
                 "[loss]\n"
                 "reliable_depth = false\n"
                 "cfc = 0.25\n");
    EXPECT_EQ(c.scene.width, 48);
    EXPECT_EQ(c.scene.plane_depth.at("plane2"), 2.5);
    EXPECT_EQ(c.train.iterations, 1234);
    EXPECT_EQ(c.train.points_field.variant, FieldVariant::main);
    EXPECT_FALSE(c.train.loss.reliable_depth);
    EXPECT_EQ(c.train.loss.cfc, 0.25);
}

TEST(Config, UnknownKeyReportsFileAndLine) {
    RunConfig c;
    const std::string msg = error_of([&] { parse_config(c, "[train]\niterations = 5\nbogus = 1\n", "run.conf"); });
    EXPECT_NE(msg.find("run.conf:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("train.bogus"), std::string::npos) << msg;
}

TEST(Config, UnknownSectionReportsFileAndLine) {
    RunConfig c;
    const std::string msg = error_of([&] { parse_config(c, "\n[optim]\n", "a.conf"); });
    EXPECT_NE(msg.find("a.conf:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("optim"), std::string::npos) << msg;
}

TEST(Config, MalformedLinesRejected) {
    RunConfig c;
    EXPECT_THROW(parse_config(c, "iterations = 3\n"), ConfigError);
    EXPECT_THROW(parse_config(c, "[train\n"), ConfigError);
    EXPECT_THROW(parse_config(c, "[train]\niterations\n"), ConfigError);
    EXPECT_THROW(parse_config(c, "[train]\niterations = 3.5\n"), ConfigError);
    EXPECT_THROW(parse_config(c, "[loss]\nreliable_depth = maybe\n"), ConfigError);
    EXPECT_THROW(parse_config(c, "[train]\nviews_variant = huge\n"), ConfigError);
}

TEST(Config, TextRoundTripIsExact) {
    RunConfig a;
    apply_preset(a, "small-aug");
    a.scene.plane_depth["plane3"] = 3.125;
    a.train.lr_init = 1.0 / 3.0;
    a.train.seed = 0xFFFFFFFFFFFFull;
    a.train.loss.reliable_depth = false;
    const std::string text = to_text(a);
    RunConfig b;
    parse_config(b, text);
    EXPECT_EQ(to_text(b), text);
    EXPECT_EQ(b.train.lr_init, 1.0 / 3.0);
    EXPECT_EQ(b.train.points_field.hidden_layers, a.train.points_field.hidden_layers);
    EXPECT_EQ(b.scene.plane_depth, a.scene.plane_depth);
}

TEST(Config, OverridesUseDottedKeys) {
    RunConfig c;
    apply_override(c, "train.batch_rays=7");
    apply_override(c, "scene.plane1_depth = 1.75");
    EXPECT_EQ(c.train.batch_rays, 7);
    EXPECT_EQ(c.scene.plane_depth.at("plane1"), 1.75);
    EXPECT_THROW(apply_override(c, "train.batch_rays"), ConfigError);
    EXPECT_THROW(apply_override(c, "nope.x=1"), ConfigError);
}

TEST(Config, PresetsAdjustTheObjective) {
    for (const auto& name : preset_names()) {
        RunConfig c;
        apply_preset(c, name);
        EXPECT_EQ(c.preset, name);
        EXPECT_NO_THROW(validate(c)) << name;
    }
    RunConfig base;
    apply_preset(base, "dsnerf-baseline");
    EXPECT_EQ(base.train.loss.points, 0.0);
    EXPECT_EQ(base.train.loss.views, 0.0);
    EXPECT_EQ(base.train.loss.cfc, 0.0);
    EXPECT_GT(base.train.loss.sparse_depth, 0.0);

    RunConfig nv;
    apply_preset(nv, "no-views");
    EXPECT_EQ(nv.train.loss.views, 0.0);
    EXPECT_GT(nv.train.loss.points, 0.0);

    RunConfig nr;
    apply_preset(nr, "no-reliable-depth");
    EXPECT_FALSE(nr.train.loss.reliable_depth);

    RunConfig id;
    apply_preset(id, "identical-aug");
    EXPECT_EQ(id.train.points_field.variant, FieldVariant::main);
    EXPECT_EQ(id.train.views_field.variant, FieldVariant::main);

    RunConfig bad;
    EXPECT_THROW(apply_preset(bad, "everything"), ConfigError);

    RunConfig from_file;
    parse_config(from_file, "[train]\npreset = no-cfc\n[loss]\npoints = 0.3\n");
    EXPECT_EQ(from_file.preset, "no-cfc");
    EXPECT_EQ(from_file.train.loss.cfc, 0.0);
    EXPECT_EQ(from_file.train.loss.points, 0.3);
}

TEST(Config, ValidationMapsToConfigError) {
    RunConfig c;
    c.train.lr_final = c.train.lr_init * 2;
    EXPECT_THROW(validate(c), ConfigError);
    RunConfig d;
    d.eval.visibility_factor = 0.0;
    EXPECT_THROW(validate(d), ConfigError);
    RunConfig e;
    e.train.reliability.k = 0;
    EXPECT_THROW(validate(e), ConfigError);
}

TEST(Config, UnknownPlaneNamedInError) {
    RunConfig c;
    set_key(c, "scene.plane9_depth", "2");
    const std::string msg = error_of([&] { (void)c.scene.spec(); });
    EXPECT_NE(msg.find("scene.plane9_depth"), std::string::npos) << msg;
}

}  // namespace
}  // namespace snerf
