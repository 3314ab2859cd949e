// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/ablation.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ctxtrack {

SuiteResult evaluate_suite(const Model& model, const TrackerOptions& opts, const std::vector<Sequence>& suite) {
    SuiteResult out;
    for (const auto& seq : suite) {
        if (seq.frames.size() < 2) throw std::invalid_argument("evaluate_suite: sequences need at least two frames");
        const SequenceResult r = run_sequence(model, seq.frames, seq.boxes[0], opts);
        const double total_ms = std::accumulate(r.latency_ms.begin(), r.latency_ms.end(), 0.0);
        const double fps = total_ms > 0 ? 1000.0 * static_cast<double>(r.latency_ms.size()) / total_ms : 0.0;
        const std::span<const BBox> gt(seq.boxes.data() + 1, seq.boxes.size() - 1);
        out.per_sequence.push_back(compute_metrics(r.boxes, gt, fps));
    }
    out.overall = merge_reports(out.per_sequence);
    return out;
}

SuiteResult evaluate_static_baseline(const std::vector<Sequence>& suite) {
    SuiteResult out;
    for (const auto& seq : suite) {
        if (seq.frames.size() < 2) throw std::invalid_argument("evaluate_static_baseline: need two frames");
        const std::vector<BBox> pred(seq.boxes.size() - 1, seq.boxes[0]);
        const std::span<const BBox> gt(seq.boxes.data() + 1, seq.boxes.size() - 1);
        out.per_sequence.push_back(compute_metrics(pred, gt));
    }
    out.overall = merge_reports(out.per_sequence);
    return out;
}

AblationCell parse_cell(const std::string& name) {
    const auto parts = split_list(name, '-');
    if (parts.size() != 3 || (parts[2] != "ar" && parts[2] != "noar")) {
        throw ConfigError("ablation cell '" + name + "' is not <uni|bi>-<tcm|template|none>-<ar|noar>");
    }
    AblationCell c;
    c.name = name;
    c.opts.attention = parse_attention(parts[0]);
    c.opts.update = parse_update(parts[1]);
    c.opts.autoregressive = parts[2] == "ar";
    return c;
}

std::vector<AblationCell> standard_grid() {
    std::vector<AblationCell> g;
    for (const char* n : {"bi-none-ar", "uni-none-ar", "uni-template-noar", "uni-tcm-noar", "uni-template-ar",
                          "uni-tcm-ar"}) {
        g.push_back(parse_cell(n));
    }
    return g;
}

AblationSpec ablation_spec_from(const KeyValueConfig& kv) {
    std::vector<std::string> own{"cells", "seeds", "eval_sequences", "eval_length", "eval_seed", "checkpoints",
                                 "train_missing"};
    KeyValueConfig train_kv;
    for (const auto& [k, v] : kv.values()) {
        if (std::find(own.begin(), own.end(), k) == own.end()) train_kv.set(k, v);
    }
    AblationSpec spec;
    spec.train = train_config_from(train_kv);
    const auto cells = kv.get_list("cells", {});
    if (cells.empty()) {
        spec.cells = standard_grid();
    } else {
        for (const auto& c : cells) spec.cells.push_back(parse_cell(c));
    }
    spec.seeds.clear();
    for (const auto& s : kv.get_list("seeds", {"0"})) {
        KeyValueConfig one;
        one.set("seed", s);
        spec.seeds.push_back(static_cast<std::uint64_t>(one.get_int("seed", 0)));
    }
    spec.eval_sequences = static_cast<int>(kv.get_int("eval_sequences", spec.eval_sequences));
    spec.eval_length = static_cast<int>(kv.get_int("eval_length", spec.eval_length));
    spec.eval_seed = static_cast<std::uint64_t>(kv.get_int("eval_seed", 0));
    spec.checkpoints = kv.get_string("checkpoints", "");
    spec.train_missing = kv.get_bool("train_missing", true);
    if (spec.eval_sequences < 1 || spec.eval_length < 2) throw ConfigError("ablation: empty evaluation suite");
    if (spec.seeds.empty()) throw ConfigError("ablation: no seeds");
    return spec;
}

std::filesystem::path checkpoint_path(const AblationSpec& spec, const AblationCell& cell, std::uint64_t seed) {
    return spec.checkpoints / (cell.name + "-seed" + std::to_string(seed) + ".ckpt");
}

std::vector<AblationRow> run_ablation(const AblationSpec& spec, const AblationProgress& progress) {
    const std::vector<Sequence> suite =
        make_pool(spec.train.scenario, spec.eval_sequences, spec.eval_length, spec.eval_seed);
    std::vector<AblationRow> rows;
    for (const auto& cell : spec.cells) {
        for (const std::uint64_t seed : spec.seeds) {
            const auto path = checkpoint_path(spec, cell, seed);
            const bool stored = !spec.checkpoints.empty() && std::filesystem::exists(path);
            if (!stored && !spec.train_missing) throw IoError("missing checkpoint " + path.string());
            auto model = [&] {
                if (stored) return Model::load(path);
                TrainConfig tc = spec.train;
                tc.tracker = cell.opts;
                tc.tracker.reset_period = spec.train.tracker.reset_period;
                tc.tracker.capacity_multiplier = spec.train.tracker.capacity_multiplier;
                tc.tracker.template_interval = spec.train.tracker.template_interval;
                tc.seed = seed;
                Model m = train_model(tc);
                if (!spec.checkpoints.empty()) {
                    std::filesystem::create_directories(spec.checkpoints);
                    m.save(path);
                }
                return m;
            }();
            TrackerOptions opts = cell.opts;
            opts.reset_period = spec.train.tracker.reset_period;
            opts.capacity_multiplier = spec.train.tracker.capacity_multiplier;
            opts.template_interval = spec.train.tracker.template_interval;
            AblationRow row{cell, seed, evaluate_suite(model, opts, suite).overall};
            row.cell.opts = opts;
            if (progress) progress(row);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
    out << "cell,attention,update,autoregressive,seed,ao,sr50,sr75,auc,fps\n";
    const auto old = out.precision(8);
    for (const auto& r : rows) {
        out << r.cell.name << ',' << to_string(r.cell.opts.attention) << ',' << to_string(r.cell.opts.update) << ','
            << (r.cell.opts.autoregressive ? 1 : 0) << ',' << r.seed << ',' << r.report.ao << ',' << r.report.sr50
            << ',' << r.report.sr75 << ',' << r.report.auc << ',' << r.report.fps << '\n';
    }
    out.precision(old);
}

PairedTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: samples differ in length");
    if (a.size() < 2) throw std::invalid_argument("paired_t_test: need at least two pairs");
    PairedTest r;
    r.n = static_cast<int>(a.size());
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    r.mean_diff = std::accumulate(d.begin(), d.end(), 0.0) / r.n;
    double ss = 0;
    for (double v : d) ss += (v - r.mean_diff) * (v - r.mean_diff);
    const double sd = std::sqrt(ss / (r.n - 1));
    if (sd == 0) {
        r.t = r.mean_diff > 0 ? std::numeric_limits<double>::infinity()
                              : (r.mean_diff < 0 ? -std::numeric_limits<double>::infinity() : 0.0);
        r.p_one_sided = r.mean_diff > 0 ? 0.0 : (r.mean_diff < 0 ? 1.0 : 0.5);
        return r;
    }
    r.t = r.mean_diff / (sd / std::sqrt(static_cast<double>(r.n)));
    const boost::math::students_t dist(r.n - 1);
    r.p_one_sided = boost::math::cdf(boost::math::complement(dist, r.t));
    return r;
}

}  // namespace ctxtrack
