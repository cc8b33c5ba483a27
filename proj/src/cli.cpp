// Copyright 2026 The OmniUnet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "omniunet/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "omniunet/checkpoint.hpp"
#include "omniunet/dataset.hpp"
#include "omniunet/error.hpp"
#include "omniunet/image_io.hpp"
#include "omniunet/run_config.hpp"
#include "omniunet/synthetic.hpp"
#include "omniunet/trainer.hpp"

namespace omniunet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kResolvedConfig = "resolved_config.json";

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot create " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void prepare_out(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw DataError("cannot create output directory " + out.string());
}

std::string percent(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", *v * 100.0);
    return buf;
}

std::vector<ManifestEntry> labeled_entries(const DatasetManifest& m) {
    std::vector<ManifestEntry> out;
    for (const auto& e : m.entries) {
        if (e.label) out.push_back(e);
    }
    if (out.empty()) throw DataError("manifest has no labeled frames");
    return out;
}

const ManifestEntry& find_entry(const DatasetManifest& m, const std::string& id) {
    for (const auto& e : m.entries) {
        if (e.id == id) return e;
    }
    throw DataError("no frame with id '" + id + "' in the manifest");
}

void require_same_classes(const Checkpoint& ckpt, const DatasetManifest& m) {
    if (!(ckpt.classes == m.classes)) {
        throw ConfigError("the manifest's class set differs from the one the checkpoint was trained with");
    }
}

json checkpoint_echo(const Checkpoint& c, const fs::path& path) {
    return {{"checkpoint", fs::absolute(path).string()},
            {"model", c.config},
            {"classes", class_set_to_json(c.classes)},
            {"normalization", normalization_to_json(c.normalization)},
            {"metadata", c.metadata}};
}

std::string hardware_description() {
    std::string cpu = "unknown CPU";
    std::ifstream info("/proc/cpuinfo");
    std::string line;
    while (std::getline(info, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) cpu = line.substr(colon + 2);
            break;
        }
    }
    std::ostringstream s;
    s << cpu << ", " << std::thread::hardware_concurrency() << " hardware threads (inference is single-threaded)";
    return s.str();
}

// ---- dataset ----------------------------------------------------------

struct ValidateArgs {
    std::string manifest;
    std::string out;
};

int cmd_dataset_validate(const ValidateArgs& a, std::ostream& out) {
    const DatasetManifest m = load_manifest(a.manifest);
    const DatasetReport report = validate_dataset(m);
    const std::string text = format_dataset_report(report, m.classes);
    out << text;
    if (!a.out.empty()) {
        prepare_out(a.out);
        write_json(fs::path(a.out) / kResolvedConfig,
                   {{"command", "dataset validate"}, {"manifest", fs::absolute(a.manifest).string()}});
        write_text(fs::path(a.out) / "dataset_report.txt", text);
        json freq = json::object();
        for (int c = 0; c < m.classes.size(); ++c) freq[m.classes.name(c)] = report.class_pixels[static_cast<std::size_t>(c)];
        write_json(fs::path(a.out) / "dataset_report.json", {{"frames", report.entries},
                                                             {"labeled", report.labeled},
                                                             {"class_pixels", freq},
                                                             {"errors", report.errors},
                                                             {"ok", report.ok()}});
    }
    return report.ok() ? 0 : 1;
}

struct SynthArgs {
    std::string out;
    std::string mode = "terrain";
    int frames = 8;
    int height = 64;
    int width = 64;
    std::uint64_t seed = 0;
};

int cmd_dataset_synth(const SynthArgs& a, std::ostream& out) {
    SynthOptions o;
    o.mode = parse_synth_mode(a.mode);
    o.frames = a.frames;
    o.height = a.height;
    o.width = a.width;
    o.seed = a.seed;
    prepare_out(a.out);
    write_json(fs::path(a.out) / kResolvedConfig, {{"command", "dataset synth"},
                                                   {"mode", a.mode},
                                                   {"frames", a.frames},
                                                   {"height", a.height},
                                                   {"width", a.width},
                                                   {"seed", a.seed}});
    const auto m = generate_synthetic(a.out, o);
    out << "wrote " << m.entries.size() << " frames and " << (fs::path(a.out) / "manifest.jsonl").string() << '\n';
    return 0;
}

// ---- train ------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string manifest;
    std::string out;
    std::vector<std::string> sets;
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    std::vector<std::string> overrides = a.sets;
    if (a.epochs) overrides.push_back("train.epochs=" + std::to_string(*a.epochs));
    if (a.batch_size) overrides.push_back("train.batch_size=" + std::to_string(*a.batch_size));
    if (a.lr) overrides.push_back("train.learning_rate=" + json(*a.lr).dump());
    if (a.seed) overrides.push_back("train.seed=" + std::to_string(*a.seed));
    const json raw = load_config_json(a.config, overrides);
    RunConfig rc = run_config_from_json(raw, a.config.empty() ? fs::path{} : fs::absolute(a.config).parent_path());
    if (!a.manifest.empty()) rc.manifest = a.manifest;
    if (rc.manifest.empty()) throw ConfigError("no manifest given (--manifest or \"manifest\" in the config)");
    rc.train.checkpoint_dir = a.out;

    const DatasetManifest m = load_manifest(rc.manifest);
    if (rc.model.num_classes != m.classes.size()) {
        throw ConfigError("model.num_classes is " + std::to_string(rc.model.num_classes) + " but the manifest has " +
                          std::to_string(m.classes.size()) + " classes");
    }
    const auto [train_entries, val_entries] = split_dataset(labeled_entries(m), rc.train.split_ratio, rc.train.seed);
    if (val_entries.empty()) throw DataError("validation split is empty; add frames or lower split_ratio");

    prepare_out(a.out);
    write_json(fs::path(a.out) / kResolvedConfig, run_config_to_json(rc));
    json split = {{"train", json::array()}, {"val", json::array()}};
    for (const auto& e : train_entries) split["train"].push_back(e.id);
    for (const auto& e : val_entries) split["val"].push_back(e.id);
    write_json(fs::path(a.out) / "split.json", split);

    const auto train_set = load_samples(m, train_entries);
    const auto val_set = load_samples(m, val_entries);
    OmniUnet<float> model(rc.model, rc.train.seed);
    out << "training on " << train_set.size() << " frames, validating on " << val_set.size() << " ("
        << model.parameters().element_count() << " parameters)\n";
    const auto result = train(model, train_set, val_set, rc.train, m.classes, m.normalization, [&](const EpochRecord& r) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "epoch %d/%d  train_loss %.5f  val_loss %.5f  val_total_pa %s  val_mean_iou %s\n",
                      r.epoch + 1, rc.train.epochs, r.train_loss, r.val_loss, percent(r.val_total_pa).c_str(),
                      percent(r.val_mean_iou).c_str());
        out << buf << std::flush;
    });
    out << "best epoch " << result.best_epoch + 1 << " (val_loss " << result.best_val_loss << "), checkpoint "
        << result.best_path->string() << '\n';
    return 0;
}

// ---- eval -------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string manifest;
    std::string out;
    int batch_size = 16;
    std::string pa_mode = "recall";
    bool exclude_void_from_total = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    ReportOptions opt;
    if (a.pa_mode == "tn_inclusive") {
        opt.pa_mode = PixelAccuracyMode::tn_inclusive;
    } else if (a.pa_mode != "recall") {
        throw ConfigError("--pa-mode must be recall or tn_inclusive");
    }
    opt.exclude_void_from_total = a.exclude_void_from_total;
    // Everything is loaded and computed before the first file is written.
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    DatasetManifest m = load_manifest(a.manifest);
    require_same_classes(ckpt, m);
    m.normalization = ckpt.normalization;
    const auto model = restore_model(ckpt);
    const auto samples = load_samples(m, labeled_entries(m));
    const MetricsReport report = evaluate(model, samples, m.classes, a.batch_size, opt);
    const double loss = dataset_loss(model, samples, a.batch_size, m.classes);
    const std::string table = format_table(report);

    prepare_out(a.out);
    json echo = checkpoint_echo(ckpt, a.checkpoint);
    echo["command"] = "eval";
    echo["manifest"] = fs::absolute(a.manifest).string();
    echo["batch_size"] = a.batch_size;
    echo["pa_mode"] = a.pa_mode;
    echo["exclude_void_from_total"] = a.exclude_void_from_total;
    write_json(fs::path(a.out) / kResolvedConfig, echo);
    json j = report_to_json(report);
    j["loss"] = loss;
    j["frames"] = samples.size();
    write_json(fs::path(a.out) / "metrics.json", j);
    write_text(fs::path(a.out) / "metrics.txt", table);
    out << table << "loss " << loss << " over " << samples.size() << " frames\n";
    return 0;
}

// ---- infer ------------------------------------------------------------

struct InferArgs {
    std::string checkpoint;
    std::string out;
    std::string manifest;
    std::vector<std::string> ids;
    std::string rgb, depth, thermal;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    std::vector<ManifestEntry> entries;
    if (!a.manifest.empty()) {
        const DatasetManifest m = load_manifest(a.manifest);
        require_same_classes(ckpt, m);
        if (a.ids.empty()) {
            entries = m.entries;
        } else {
            for (const auto& id : a.ids) entries.push_back(find_entry(m, id));
        }
    } else if (!a.rgb.empty() && !a.depth.empty() && !a.thermal.empty()) {
        entries.push_back(ManifestEntry{fs::path(a.rgb).stem().string(), a.rgb, a.depth, a.thermal, std::nullopt});
    } else {
        throw UsageError("give --manifest, or all of --rgb, --depth and --thermal");
    }
    const auto model = restore_model(ckpt);
    prepare_out(a.out);
    json echo = checkpoint_echo(ckpt, a.checkpoint);
    echo["command"] = "infer";
    json frames = json::array();
    for (const auto& e : entries) frames.push_back(e.id);
    echo["frames"] = frames;
    write_json(fs::path(a.out) / kResolvedConfig, echo);

    NoGradGuard no_grad;
    for (auto e : entries) {
        e.label.reset();  // inference never needs ground truth
        const MultimodalFrame frame = load_frame(e, ckpt.classes);
        const Tensor<float> x = normalize(frame, ckpt.normalization);
        const LabelMask mask =
            predict_mask(model(reshape(x, {1, kInputChannels, frame.height, frame.width})));
        write_indexed_png(fs::path(a.out) / (e.id + "_mask.png"), frame.width, frame.height, mask.labels,
                          ckpt.classes.palette());
        RgbImage overlay{frame.width, frame.height, read_rgb_png(e.rgb).pixels};
        for (std::size_t i = 0; i < mask.labels.size(); ++i) {
            const Color& c = ckpt.classes.color(mask.labels[i]);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                auto& px = overlay.pixels[3 * i + ch];
                px = static_cast<std::uint8_t>((px + c[ch] + 1) / 2);
            }
        }
        write_rgb_png(fs::path(a.out) / (e.id + "_overlay.png"), overlay);
        out << e.id << ": " << frame.width << "x" << frame.height << " -> " << (fs::path(a.out) / (e.id + "_mask.png")).string()
            << '\n';
    }
    return 0;
}

// ---- bench ------------------------------------------------------------

struct BenchArgs {
    std::string checkpoint;
    std::string manifest;
    std::string out;
    std::string id;
    int n = 10;
    int warmup = 2;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    if (a.n < 1) throw ConfigError("--n must be >= 1");
    if (a.warmup < 0) throw ConfigError("--warmup must be >= 0");
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const DatasetManifest m = load_manifest(a.manifest);
    if (m.entries.empty()) throw DataError("manifest lists no frames");
    const ManifestEntry& e = a.id.empty() ? m.entries.front() : find_entry(m, a.id);
    const MultimodalFrame frame = load_frame(e, m.classes);
    const auto model = restore_model(ckpt);
    const Tensor<float> x = reshape(normalize(frame, ckpt.normalization), {1, kInputChannels, frame.height, frame.width});

    NoGradGuard no_grad;
    for (int i = 0; i < a.warmup; ++i) model(x);
    std::vector<double> ms;
    for (int i = 0; i < a.n; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto logits = model(x);
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::vector<double> sorted = ms;
    std::sort(sorted.begin(), sorted.end());
    const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    // Nearest-rank percentile.
    const double p95 = sorted[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1];

    json report = {{"frame", e.id},
                   {"extent", {frame.height, frame.width}},
                   {"warmup", a.warmup},
                   {"samples_ms", ms},
                   {"mean_ms", mean},
                   {"median_ms", median},
                   {"p95_ms", p95},
                   {"min_ms", sorted.front()},
                   {"max_ms", sorted.back()},
                   {"hardware", hardware_description()},
                   {"model", ckpt.config}};
    std::ostringstream text;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "single-frame forward on %s (%dx%d), %d warmup + %d timed runs\n"
                  "mean %.2f ms  median %.2f ms  p95 %.2f ms  min %.2f ms  max %.2f ms\n",
                  e.id.c_str(), frame.width, frame.height, a.warmup, a.n, mean, median, p95, sorted.front(),
                  sorted.back());
    text << buf << "hardware: " << hardware_description() << '\n' << "model: " << json(ckpt.config).dump() << '\n';

    prepare_out(a.out);
    json echo = checkpoint_echo(ckpt, a.checkpoint);
    echo["command"] = "bench";
    echo["manifest"] = fs::absolute(a.manifest).string();
    echo["n"] = a.n;
    echo["warmup"] = a.warmup;
    write_json(fs::path(a.out) / kResolvedConfig, echo);
    write_json(fs::path(a.out) / "latency.json", report);
    write_text(fs::path(a.out) / "latency.txt", text.str());
    out << text.str();
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"OmniUnet RGB-D-T terrain segmentation", "omniunet"};
    app.require_subcommand(1);
    int status = 0;
    std::function<int()> action;

    auto* dataset = app.add_subcommand("dataset", "Dataset utilities");
    dataset->require_subcommand(1);
    ValidateArgs va;
    auto* validate = dataset->add_subcommand("validate", "Check every frame and print class pixel frequencies");
    validate->add_option("--manifest", va.manifest, "Manifest (.jsonl)")->required();
    validate->add_option("--out", va.out, "Also write the report into this directory");
    validate->callback([&] { action = [&] { return cmd_dataset_validate(va, out); }; });

    SynthArgs sa;
    auto* synth = dataset->add_subcommand("synth", "Generate a synthetic RGB-D-T dataset");
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--mode", sa.mode, "terrain or thermal_only")->capture_default_str();
    synth->add_option("--frames", sa.frames)->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--height", sa.height)->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--width", sa.width)->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--seed", sa.seed)->capture_default_str();
    synth->callback([&] { action = [&] { return cmd_dataset_synth(sa, out); }; });

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train and keep the lowest-validation-loss checkpoint");
    train_cmd->add_option("--config", ta.config, "Run config (JSON)");
    train_cmd->add_option("--manifest", ta.manifest, "Manifest; overrides the config");
    train_cmd->add_option("--out", ta.out, "Output directory")->required();
    train_cmd->add_option("--set", ta.sets, "Override a config key, e.g. train.epochs=3 (repeatable)");
    train_cmd->add_option("--epochs", ta.epochs);
    train_cmd->add_option("--batch-size", ta.batch_size);
    train_cmd->add_option("--lr", ta.lr);
    train_cmd->add_option("--seed", ta.seed);
    train_cmd->callback([&] { action = [&] { return cmd_train(ta, out); }; });

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on every labeled frame of a manifest");
    eval_cmd->add_option("--checkpoint", ea.checkpoint)->required();
    eval_cmd->add_option("--manifest", ea.manifest)->required();
    eval_cmd->add_option("--out", ea.out, "Output directory")->required();
    eval_cmd->add_option("--batch-size", ea.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
    eval_cmd->add_option("--pa-mode", ea.pa_mode, "Per-class accuracy: recall or tn_inclusive")->capture_default_str();
    eval_cmd->add_flag("--exclude-void-from-total", ea.exclude_void_from_total);
    eval_cmd->callback([&] { action = [&] { return cmd_eval(ea, out); }; });

    InferArgs ia;
    auto* infer_cmd = app.add_subcommand("infer", "Write palette masks and 50% overlays");
    infer_cmd->add_option("--checkpoint", ia.checkpoint)->required();
    infer_cmd->add_option("--out", ia.out, "Output directory")->required();
    infer_cmd->add_option("--manifest", ia.manifest);
    infer_cmd->add_option("--id", ia.ids, "Frame ids from the manifest (default: all)");
    infer_cmd->add_option("--rgb", ia.rgb);
    infer_cmd->add_option("--depth", ia.depth);
    infer_cmd->add_option("--thermal", ia.thermal);
    infer_cmd->callback([&] { action = [&] { return cmd_infer(ia, out); }; });

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("bench", "Time single-frame inference");
    bench_cmd->add_option("--checkpoint", ba.checkpoint)->required();
    bench_cmd->add_option("--manifest", ba.manifest)->required();
    bench_cmd->add_option("--out", ba.out, "Output directory")->required();
    bench_cmd->add_option("--id", ba.id, "Frame id (default: first)");
    bench_cmd->add_option("--n", ba.n, "Timed runs")->capture_default_str();
    bench_cmd->add_option("--warmup", ba.warmup, "Untimed runs first")->capture_default_str();
    bench_cmd->callback([&] { action = [&] { return cmd_bench(ba, out); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }
    try {
        status = action ? action() : 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return status;
}

}  // namespace omniunet
