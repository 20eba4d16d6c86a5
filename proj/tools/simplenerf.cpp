// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "simplenerf/config.hpp"
#include "simplenerf/dataset.hpp"
#include "simplenerf/gradcheck.hpp"
#include "simplenerf/io.hpp"
#include "simplenerf/pipeline.hpp"
#include "simplenerf/runtime.hpp"
#include "simplenerf/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace snerf;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string preset;
    bool deterministic = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_preset) {
    cmd->add_option("--config", c.config, "sectioned key = value config file");
    cmd->add_option("--set", c.sets, "override, section.key=value (repeatable)");
    cmd->add_option("--seed", c.seed, "random seed");
    if (with_preset) cmd->add_option("--preset", c.preset, "ablation preset");
    cmd->add_flag("--deterministic", c.deterministic, "single-threaded, bitwise reproducible");
}

/// defaults -> config file (or `fallback` when none is given) -> preset -> --set.
RunConfig resolve(const Common& c, const std::optional<fs::path>& fallback = std::nullopt) {
    RunConfig cfg;
    if (!c.config.empty()) {
        if (!fs::exists(c.config)) throw ConfigError("config file '" + c.config + "' does not exist");
        parse_config(cfg, io::read_text(c.config), c.config);
    } else if (fallback && fs::exists(*fallback)) {
        parse_config(cfg, io::read_text(*fallback), fallback->string());
    }
    if (!c.preset.empty()) apply_preset(cfg, c.preset);
    for (const auto& s : c.sets) apply_override(cfg, s);
    validate(cfg);
    return cfg;
}

void prepare_out_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!force) throw ConfigError("output directory '" + dir.string() + "' is not empty (use --force)");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
}

Dataset load_dataset(const fs::path& dir, const RunConfig& cfg) {
    Dataset data = load_llff(dir, cfg.scene.train_views);
    if (data.train.empty()) throw DataError("dataset '" + dir.string() + "' has no training views");
    return data;
}

int cmd_make_data(const Common& c, const fs::path& out, bool force) {
    RunConfig cfg = resolve(c);
    if (c.seed) cfg.scene.seed = *c.seed;
    prepare_out_dir(out, force);
    const Dataset data = make_synthetic(cfg.scene);
    write_dataset(out, data);
    io::write_text(out / "config.txt", to_text(cfg));
    std::printf("scene      %s\n", cfg.scene.name.c_str());
    std::printf("views      %zu (%dx%d)\n", data.views.size(), cfg.scene.width, cfg.scene.height);
    std::printf("train      %s\n", detail::index_list(data.train).c_str());
    std::printf("test       %s\n", detail::index_list(data.test).c_str());
    std::printf("sparse     %zu keypoints\n", data.sparse.size());
    std::printf("bounds     near %g far %g\n", data.near, data.far);
    for (std::size_t i = 0; i < data.views.size(); ++i)
        std::printf("  images/%s.png  depth/%s.pfm\n", detail::view_stem(i).c_str(), detail::view_stem(i).c_str());
    std::printf("  poses_bounds.bin  sparse_depth.csv  split.txt  config.txt\n");
    return 0;
}

int cmd_train(const Common& c, const fs::path& data_dir, const fs::path& out, bool resume, bool force,
              std::optional<long> stop_at) {
    RunConfig cfg = resolve(c);
    if (c.seed) cfg.train.seed = *c.seed;
    const Dataset data = load_dataset(data_dir, cfg);
    if (!resume) prepare_out_dir(out, force);
    io::write_text(out / "config.txt", to_text(cfg));
    TrainOptions opt;
    opt.checkpoint_every = cfg.checkpoint_every;
    opt.resume = resume;
    opt.stop_at = stop_at;
    const long report = std::max(1L, cfg.train.iterations / 20);
    opt.on_step = [report](long it, const StepStats& s) {
        if ((it + 1) % report == 0)
            std::printf("iter %6ld  lr %.3e  L_color %.5f  L_sd %.5f  total %.5f\n", it + 1, s.lr, s.loss.color,
                        s.loss.sparse_depth, s.loss.total);
    };
    const TrainResult res = train(bind_dataset(cfg.train, data), data, out, opt);
    std::printf("checkpoint %s (iteration %ld)\nmetrics    %s\n", res.checkpoint.c_str(), res.state.iteration,
                res.metrics.c_str());
    return 0;
}

TrainState load_model(const fs::path& checkpoint) {
    if (!fs::exists(checkpoint)) throw DataError("checkpoint '" + checkpoint.string() + "' does not exist");
    return load_checkpoint(checkpoint);
}

int cmd_render(const Common& c, const fs::path& checkpoint, const fs::path& data_dir, const fs::path& out,
               const std::string& which, bool force) {
    const RunConfig cfg = resolve(c, checkpoint.parent_path() / "config.txt");
    const Dataset data = load_dataset(data_dir, cfg);
    const TrainState state = load_model(checkpoint);
    prepare_out_dir(out, force);
    io::write_text(out / "config.txt", to_text(cfg));
    std::vector<int> views;
    if (which == "test") views = data.test;
    else if (which == "train") views = data.train;
    else for (std::size_t i = 0; i < data.views.size(); ++i) views.push_back(static_cast<int>(i));
    const RenderConfig rc = bind_dataset(cfg.train, data).render;
    for (int v : views) {
        const auto r = render_view(state, data.views[static_cast<std::size_t>(v)].camera, rc,
                                   mix_seed(cfg.eval.seed, static_cast<std::uint64_t>(v), 0));
        const std::string stem = detail::view_stem(static_cast<std::size_t>(v));
        io::write_png(out / (stem + ".png"), r.image);
        io::write_pfm(out / (stem + "_depth.pfm"), r.depth);
        std::printf("rendered %s\n", stem.c_str());
    }
    return 0;
}

int cmd_evaluate(const Common& c, const fs::path& checkpoint, const fs::path& data_dir, const fs::path& out,
                 bool force) {
    const bool prerendered = fs::is_directory(checkpoint);
    const RunConfig cfg =
        resolve(c, prerendered ? std::optional<fs::path>{} : std::optional<fs::path>{checkpoint.parent_path() / "config.txt"});
    const Dataset data = load_dataset(data_dir, cfg);
    if (data.test.empty()) throw DataError("dataset '" + data_dir.string() + "' has no test split");
    for (int t : data.test)
        for (int r : data.train)
            if (t == r) throw DataError("split mismatch: view " + std::to_string(t) + " is both train and test");
    Evaluation ev;
    if (prerendered) {
        ev = evaluate_renders(checkpoint, data, cfg.eval);
    } else {
        const TrainState state = load_model(checkpoint);
        ev = evaluate_model(state, data, bind_dataset(cfg.train, data).render, cfg.eval);
    }
    prepare_out_dir(out, force);
    io::write_text(out / "config.txt", to_text(cfg));
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        const std::string stem = detail::view_stem(static_cast<std::size_t>(data.test[i]));
        io::write_png(out / (stem + ".png"), ev.renders[i].image);
        io::write_pfm(out / (stem + "_depth.pfm"), ev.renders[i].depth);
        io::write_png(out / (stem + "_mask.png"), ev.masks[i]);
    }
    io::write_text(out / "report.csv", ev.report.to_csv());
    std::printf("%s", ev.report.summary().c_str());
    std::printf("coarse/fine depth gap: %.9g\n", ev.coarse_fine_gap);
    return 0;
}

int cmd_mask(const Common& c, const fs::path& data_dir, const fs::path& out, const std::string& checkpoint,
             bool force) {
    const RunConfig cfg = resolve(c);
    const Dataset data = load_dataset(data_dir, cfg);
    prepare_out_dir(out, force);
    io::write_text(out / "config.txt", to_text(cfg));
    const auto masks = test_visibility_masks(data, cfg.eval.visibility_factor);
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const std::string stem = detail::view_stem(static_cast<std::size_t>(data.test[i]));
        io::write_png(out / (stem + "_visibility.png"), masks[i]);
        std::printf("%s visibility coverage %.4f\n", stem.c_str(), masks[i].coverage());
    }
    if (checkpoint.empty()) return 0;

    // Reliability verdicts of every train pixel at the trained depths:
    // 255 = augmented depth trusted, 0 = main depth trusted, 128 = neither.
    const TrainState state = load_model(checkpoint);
    const TrainConfig tc = bind_dataset(cfg.train, data);
    Trainer trainer(tc, data);
    for (int v : data.train) {
        const auto& img = data.views[static_cast<std::size_t>(v)].image;
        std::vector<BatchRay> rays;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) rays.push_back({v, x, y, std::nullopt});
        const BatchForward fw = trainer.forward(state, rays, 0, false);
        const RayBatchOutputs batch = trainer.loss_inputs(fw, tc.iterations);
        auto write = [&](const char* tag, auto pick) {
            Image m(img.width, img.height);
            for (std::size_t r = 0; r < rays.size(); ++r) {
                const double g = 0.5 * (1.0 + pick(batch.rays[r]));
                m.set(rays[r].x, rays[r].y, Color(g, g, g));
            }
            const std::string name = detail::view_stem(static_cast<std::size_t>(v)) + "_" + tag + ".png";
            io::write_png(out / name, m);
        };
        if (batch.has_ap) write("m_ap", [](const RayTerms& t) { return t.m_ap; });
        if (batch.has_av) write("m_av", [](const RayTerms& t) { return t.m_av; });
        write("m_cfc", [](const RayTerms& t) { return t.m_cfc; });
        std::printf("%s reliability masks written\n", detail::view_stem(static_cast<std::size_t>(v)).c_str());
    }
    return 0;
}

int cmd_grad_check(const Common& c, const std::string& fault) {
    GradCheckOptions opt;
    if (c.seed) opt.seed = *c.seed;
    if (fault == "cos-sign") opt.encode_backward = &encode_backward_cos_sign_bug;
    else if (!fault.empty()) throw ConfigError("unknown fault '" + fault + "'");
    const GradCheckReport rep = run_grad_checks(opt);
    std::printf("%s", rep.to_text().c_str());
    std::printf("max relative error %.3e (tolerance %.0e): %s\n", rep.max_rel_error(), opt.tolerance,
                rep.passed() ? "PASS" : "FAIL");
    return rep.passed() ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"Sparse-input radiance fields with augmented-model depth supervision"};
    app.require_subcommand(1);

    Common c;
    std::string out, data_dir, checkpoint, views = "test", fault;
    bool force = false, resume = false;
    std::optional<long> stop_at;

    auto* make = app.add_subcommand("make-data", "render a synthetic scene into a dataset directory");
    add_common(make, c, false);
    make->add_option("out_dir", out)->required();
    make->add_flag("--force", force, "replace a non-empty output directory");

    auto* tr = app.add_subcommand("train", "train the model on a dataset");
    add_common(tr, c, true);
    tr->add_option("dataset_dir", data_dir)->required();
    tr->add_option("out_dir", out)->required();
    tr->add_flag("--resume", resume, "continue from out_dir/checkpoint.snrf");
    tr->add_flag("--force", force, "replace a non-empty output directory");
    tr->add_option("--stop-at", stop_at, "stop after this many iterations (simulated interruption)");

    auto* rd = app.add_subcommand("render", "render views with a trained checkpoint");
    add_common(rd, c, false);
    rd->add_option("checkpoint", checkpoint)->required();
    rd->add_option("dataset_dir", data_dir)->required();
    rd->add_option("out_dir", out)->required();
    rd->add_option("--views", views, "test, train or all")->check(CLI::IsMember({"test", "train", "all"}));
    rd->add_flag("--force", force, "replace a non-empty output directory");

    auto* ev = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    add_common(ev, c, false);
    ev->add_option("checkpoint", checkpoint, "checkpoint file, or a directory of pre-rendered views")->required();
    ev->add_option("dataset_dir", data_dir)->required();
    ev->add_option("out_dir", out)->required();
    ev->add_flag("--force", force, "replace a non-empty output directory");

    auto* mk = app.add_subcommand("mask", "export visibility masks (and reliability masks with --checkpoint)");
    add_common(mk, c, false);
    mk->add_option("dataset_dir", data_dir)->required();
    mk->add_option("out_dir", out)->required();
    mk->add_option("--checkpoint", checkpoint, "trained checkpoint for reliability masks");
    mk->add_flag("--force", force, "replace a non-empty output directory");

    auto* gc = app.add_subcommand("grad-check", "finite-difference checks of every backward pass");
    add_common(gc, c, false);
    gc->add_option("--inject-fault", fault, "test fixture: cos-sign")->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*make) return cmd_make_data(c, out, force);
        if (*tr) return cmd_train(c, data_dir, out, resume, force, stop_at);
        if (*rd) return cmd_render(c, checkpoint, data_dir, out, views, force);
        if (*ev) return cmd_evaluate(c, checkpoint, data_dir, out, force);
        if (*mk) return cmd_mask(c, data_dir, out, checkpoint, force);
        if (*gc) return cmd_grad_check(c, fault);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 4;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
