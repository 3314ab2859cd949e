// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: data generation, training, tracking, evaluation,
// importance probing, FLOPs accounting and ablation sweeps.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <numeric>
#include <string>

#include "ctxtrack/ablation.hpp"
#include "ctxtrack/flops.hpp"
#include "ctxtrack/metrics.hpp"
#include "ctxtrack/synth.hpp"
#include "ctxtrack/training.hpp"

namespace {

using namespace ctxtrack;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

struct TrackerFlags {
    std::string attention;
    std::string update;
    std::string autoregressive;
    std::string class_scores;
    int reset_period = 0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--attention", attention, "uni|bi");
        cmd->add_option("--update", update, "tcm|template|none");
        cmd->add_option("--autoregressive", autoregressive, "on|off");
        cmd->add_option("--reset-period", reset_period, "frames between importance resets");
        cmd->add_option("--class-scores", class_scores, "soft|hard")->check(CLI::IsMember({"soft", "hard"}));
    }

    TrackerOptions apply(TrackerOptions o) const {
        if (!attention.empty()) o.attention = parse_attention(attention);
        if (!update.empty()) o.update = parse_update(update);
        if (!autoregressive.empty()) {
            KeyValueConfig kv;
            kv.set("autoregressive", autoregressive);
            o.autoregressive = kv.get_bool("autoregressive", true);
        }
        if (!class_scores.empty()) o.hard_class_scores = class_scores == "hard";
        if (reset_period > 0) o.reset_period = reset_period;
        o.validate();
        return o;
    }
};

int cmd_gen(const std::string& scenario, std::uint64_t seed, int length, const std::string& out) {
    const Sequence seq = generate_sequence(scenario_config(parse_scenario(scenario), length), seed);
    write_sequence(out, seq);
    std::cout << "wrote " << seq.frames.size() << " frames to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config, const std::vector<std::string>& sets, int steps, long long seed,
              const std::string& out) {
    KeyValueConfig kv = config.empty() ? KeyValueConfig{} : KeyValueConfig::load(config);
    for (const auto& s : sets) {
        const KeyValueConfig one = KeyValueConfig::parse(s, "--set");
        for (const auto& [k, v] : one.values()) kv.set(k, v);
    }
    if (steps >= 0) kv.set("steps", std::to_string(steps));
    if (seed >= 0) kv.set("seed", std::to_string(seed));
    const TrainConfig tc = train_config_from(kv);
    const Model model = train_model(tc, [](const TrainLogEntry& e) {
        std::cerr << "step " << e.step << " loss " << e.loss << " elapsed " << e.seconds << "s\n";
    });
    model.save(out);
    std::cout << "saved " << out << "\n";
    return 0;
}

int cmd_track(const std::string& ckpt, const std::string& seq_dir, const std::string& out, const std::string& trace,
              const TrackerFlags& flags) {
    const Model model = Model::load(ckpt);
    const Sequence seq = read_sequence(seq_dir);
    if (seq.boxes.empty()) throw IoError(seq_dir + " has no groundtruth.txt to take the initial box from");
    const TrackerOptions opts = flags.apply({});
    const SequenceResult r = run_sequence(model, seq.frames, seq.boxes[0], opts);
    std::vector<BBox> boxes{seq.boxes[0]};
    boxes.insert(boxes.end(), r.boxes.begin(), r.boxes.end());
    write_boxes(out, boxes, seq.frames[0].width, seq.frames[0].height);
    if (!trace.empty()) {
        auto t = open_out(trace);
        for (const auto& rec : r.trace) {
            t << nlohmann::json{{"frame", rec.frame_id},
                                {"confidence", rec.confidence},
                                {"bank_size", rec.bank_size},
                                {"reset", rec.reset},
                                {"latency_ms", rec.latency_ms}}
                     .dump()
              << "\n";
        }
    }
    return 0;
}

int cmd_eval(const std::string& pred_file, const std::string& gt_dir, const std::string& report,
             const std::string& trace) {
    const auto gt = read_boxes(std::filesystem::path(gt_dir) / "groundtruth.txt", 1, 1);
    const auto pred = read_boxes(pred_file, 1, 1);
    if (pred.size() != gt.size()) {
        throw std::invalid_argument("prediction has " + std::to_string(pred.size()) + " lines, ground truth " +
                                    std::to_string(gt.size()));
    }
    if (gt.size() < 2) throw std::invalid_argument("need at least two frames to evaluate");
    double fps = 0;
    if (!trace.empty()) {
        std::ifstream in(trace);
        if (!in) throw IoError("cannot open " + trace);
        double ms = 0;
        int n = 0;
        for (std::string line; std::getline(in, line);) {
            if (line.empty()) continue;
            ms += nlohmann::json::parse(line).at("latency_ms").get<double>();
            ++n;
        }
        if (ms > 0) fps = 1000.0 * n / ms;
    }
    // Frame 0 carries the given box and is not scored.
    const std::span<const BBox> p(pred.data() + 1, pred.size() - 1), g(gt.data() + 1, gt.size() - 1);
    const MetricReport m = compute_metrics(p, g, fps);
    auto out = open_out(report);
    out << "ao,sr50,sr75,auc,fps,frames\n" << m.ao << ',' << m.sr50 << ',' << m.sr75 << ',' << m.auc << ',' << m.fps
        << ',' << m.frames << "\n";
    std::cout << "AO " << m.ao << " SR50 " << m.sr50 << " SR75 " << m.sr75 << " AUC " << m.auc << "\n";
    return 0;
}

int cmd_probe(const std::string& ckpt, const std::string& seq_dir, const std::string& out_file,
              const TrackerFlags& flags) {
    const Model model = Model::load(ckpt);
    const Sequence seq = read_sequence(seq_dir);
    if (seq.boxes.empty()) throw IoError(seq_dir + " has no groundtruth.txt to take the initial box from");
    auto out = open_out(out_file);
    out << "frame_id,token_index,source_frame_id,cell_row,cell_col,importance\n";
    const TrackerOptions opts = flags.apply({});
    if (opts.update != UpdateMode::Tcm) throw ConfigError("probe needs --update tcm");
    // Tokens appended by the current frame have no importance yet and are skipped.
    run_sequence(model, seq.frames, seq.boxes[0], opts, [&](const TrackState& st, const StepResult&) {
        const auto& b = st.bank;
        for (int i = 0; i < b.size(); ++i) {
            const auto& pv = b.provenance[static_cast<std::size_t>(i)];
            if (pv.source_frame == st.frame_id) continue;
            out << st.frame_id << ',' << i << ',' << pv.source_frame << ',' << pv.cell.row << ',' << pv.cell.col << ','
                << b.importance[static_cast<std::size_t>(i)] << "\n";
        }
    });
    return 0;
}

int cmd_flops(std::int64_t ns, std::int64_t nr, std::int64_t dim, std::int64_t layers, std::int64_t heads,
              const std::string& mode) {
    const AttentionCost c = attention_flops(ns, nr, dim, layers, heads, parse_attention(mode));
    std::cout << "mode,attention_macs,projection_macs,mlp_macs,total_macs\n"
              << mode << ',' << c.attention << ',' << c.projection << ',' << c.mlp << ',' << c.total() << "\n";
    return 0;
}

int cmd_ablate(const std::string& grid, const std::string& out_file) {
    const AblationSpec spec = ablation_spec_from(KeyValueConfig::load(grid));
    const auto rows = run_ablation(spec, [](const AblationRow& r) {
        std::cerr << r.cell.name << " seed " << r.seed << " AO " << r.report.ao << "\n";
    });
    auto out = open_out(out_file);
    write_ablation_csv(out, rows);
    return 0;
}

std::string one_line(std::string s) {
    for (auto& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ctxtrack: token-context single-object tracker"};
    app.require_subcommand(1);

    std::string scenario = "drift", out, config, ckpt, seq, pred, gt, report, trace, mode = "uni", grid;
    std::uint64_t seed = 0;
    long long train_seed = -1;
    int length = 100, steps = -1;
    std::vector<std::string> sets;
    std::int64_t ns = 0, nr = 0, dim = 0, layers = 1, heads = 1;
    TrackerFlags track_flags, probe_flags;

    auto* gen = app.add_subcommand("gen", "generate a synthetic sequence");
    gen->add_option("--scenario", scenario, "drift|distractor|occlude")->required();
    gen->add_option("--seed", seed, "scene seed")->required();
    gen->add_option("--length", length, "frames");
    gen->add_option("--out", out, "output directory")->required();

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config, "key = value file");
    train->add_option("--set", sets, "key=value override (repeatable)");
    train->add_option("--steps", steps, "override steps");
    train->add_option("--seed", train_seed, "override seed");
    train->add_option("--out", out, "checkpoint path")->required();

    auto* track = app.add_subcommand("track", "track one sequence");
    track->add_option("--ckpt", ckpt)->required();
    track->add_option("--seq", seq)->required();
    track->add_option("--out", out, "prediction file (x,y,w,h pixels per frame)")->required();
    track->add_option("--trace", trace, "JSON-lines trace file");
    track_flags.add_to(track);

    auto* eval = app.add_subcommand("eval", "score predictions");
    eval->add_option("--pred", pred)->required();
    eval->add_option("--gt", gt, "sequence directory with groundtruth.txt")->required();
    eval->add_option("--report", report, "CSV report")->required();
    eval->add_option("--trace", trace, "trace from track, for FPS");

    auto* probe = app.add_subcommand("probe", "per-token importance over a sequence");
    probe->add_option("--ckpt", ckpt)->required();
    probe->add_option("--seq", seq)->required();
    probe->add_option("--out", out, "CSV")->required();
    probe_flags.add_to(probe);

    auto* flops = app.add_subcommand("flops", "attention multiply-accumulate counts");
    flops->add_option("--ns", ns)->required();
    flops->add_option("--nr", nr)->required();
    flops->add_option("--dim", dim)->required();
    flops->add_option("--layers", layers);
    flops->add_option("--heads", heads);
    flops->add_option("--mode", mode, "uni|bi");

    auto* ablate = app.add_subcommand("ablate", "train and score an ablation grid");
    ablate->add_option("--grid", grid)->required();
    ablate->add_option("--out", out, "CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << std::endl;
        return 2;
    }

    try {
        if (*gen) return cmd_gen(scenario, seed, length, out);
        if (*train) return cmd_train(config, sets, steps, train_seed, out);
        if (*track) return cmd_track(ckpt, seq, out, trace, track_flags);
        if (*eval) return cmd_eval(pred, gt, report, trace);
        if (*probe) return cmd_probe(ckpt, seq, out, probe_flags);
        if (*flops) return cmd_flops(ns, nr, dim, layers, heads, mode);
        if (*ablate) return cmd_ablate(grid, out);
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << one_line(e.what()) << std::endl;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << one_line(e.what()) << std::endl;
    } catch (const ShapeError& e) {
        std::cerr << "error: shape: " << one_line(e.what()) << std::endl;
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << one_line(e.what()) << std::endl;
    } catch (const std::exception& e) {
        std::cerr << "error: invalid: " << one_line(e.what()) << std::endl;
    }
    return 1;
}
