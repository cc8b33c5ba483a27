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

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Criteria can be selected by number on the command line.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "omniunet/checkpoint.hpp"
#include "omniunet/class_set.hpp"
#include "omniunet/encoder.hpp"
#include "omniunet/losses.hpp"
#include "omniunet/metrics.hpp"
#include "omniunet/model.hpp"
#include "omniunet/ops.hpp"
#include "omniunet/synthetic.hpp"
#include "omniunet/trainer.hpp"
#include "support/brute_metrics.hpp"
#include "support/gradcheck.hpp"
#include "support/temp_dir.hpp"

using namespace omniunet;
using namespace omniunet::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 3) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

LabelMask random_target(std::mt19937_64& g, std::int64_t n, std::int64_t h, std::int64_t w, int k) {
    LabelMask t(n, h, w);
    std::uniform_int_distribution<int> label(0, k - 1);
    for (auto& l : t.labels) l = static_cast<std::uint8_t>(label(g));
    return t;
}

DatasetManifest synth(const fs::path& dir, SynthMode mode, int frames, int size, std::uint64_t seed) {
    SynthOptions o;
    o.mode = mode;
    o.frames = frames;
    o.height = size;
    o.width = size;
    o.seed = seed;
    return generate_synthetic(dir, o);
}

// ---- 1, 2 ----------------------------------------------------------------

struct MetricInstances {
    std::vector<std::pair<LabelMask, LabelMask>> pairs;
    MetricInstances() {
        std::mt19937_64 g(2024);
        for (int i = 0; i < 100; ++i) pairs.push_back(random_mask_pair(g, 32, 32, 8));
    }
};

const MetricInstances& metric_instances() {
    static MetricInstances m;
    return m;
}

Outcome metric_oracle() {
    const auto t0 = Clock::now();
    const int k = 8;
    std::size_t compared = 0, mismatches = 0;
    const auto expect = [&](const std::optional<double>& a, const std::optional<double>& b) {
        ++compared;
        if (a != b) ++mismatches;
    };
    for (const auto& [pred, gt] : metric_instances().pairs) {
        ConfusionMatrix conf(k);
        conf.accumulate(pred, gt);
        for (int c = 0; c < k; ++c) {
            expect(dice_coefficient(conf, c), brute_dice(pred, gt, c));
            expect(iou(conf, c), brute_iou(pred, gt, c));
            expect(class_recall(conf, c), brute_recall(pred, gt, c));
            expect(pixel_accuracy(conf, c), brute_pa(pred, gt, c));
        }
        for (const std::vector<int>& ex : {std::vector<int>{}, std::vector<int>{0}}) {
            expect(total_pa(conf, ex), brute_total_pa(pred, gt, ex));
            expect(mean_iou(conf, ex), brute_mean(k, ex, [&](int c) { return brute_iou(pred, gt, c); }));
            expect(mean_dice(conf, ex), brute_mean(k, ex, [&](int c) { return brute_dice(pred, gt, c); }));
            expect(mean_pa(conf, ex), brute_mean(k, ex, [&](int c) { return brute_recall(pred, gt, c); }));
            expect(mean_pa(conf, ex, PixelAccuracyMode::tn_inclusive),
                   brute_mean(k, ex, [&](int c) -> std::optional<double> {
                       // classes absent from both masks are skipped in the mean
                       const auto n = brute_counts(pred, gt, c);
                       if (n.tp + n.fp + n.fn == 0) return std::nullopt;
                       return brute_pa(pred, gt, c);
                   }));
        }
    }
    const double elapsed = seconds_since(t0);
    return {mismatches == 0 && elapsed < 10.0, std::to_string(compared) + " values over 100 instances, " +
                                                   std::to_string(mismatches) + " mismatches, " + fmt(elapsed) + " s"};
}

Outcome dice_jaccard() {
    std::size_t checked = 0, rational_fail = 0;
    double worst = 0.0;
    for (const auto& [pred, gt] : metric_instances().pairs) {
        ConfusionMatrix conf(8);
        conf.accumulate(pred, gt);
        for (int c = 0; c < 8; ++c) {
            const auto d = dice_coefficient(conf, c);
            const auto j = iou(conf, c);
            if (!d || !j) continue;
            ++checked;
            // D = 2TP/(2TP+FP+FN) and 2J/(1+J) = 2TP/(2TP+FP+FN) with J = TP/(TP+FP+FN):
            // compare the reduced fractions in integers, then the doubles.
            const std::uint64_t tp = conf.true_positives(c), fp = conf.false_positives(c),
                                fn = conf.false_negatives(c);
            const std::uint64_t jn = tp, jd = tp + fp + fn;
            if (2 * tp * (jd + jn) != 2 * jn * (2 * tp + fp + fn)) ++rational_fail;
            worst = std::max(worst, std::abs(*d - 2 * *j / (1 + *j)));
        }
    }
    const bool pass = checked > 0 && rational_fail == 0 && worst <= 4 * std::numeric_limits<double>::epsilon();
    return {pass, std::to_string(checked) + " class instances, exact in integer counts, max float gap " + fmt(worst)};
}

// ---- 3 -------------------------------------------------------------------

Outcome gradients() {
    const auto t0 = Clock::now();
    std::mt19937_64 g(31);
    Rng rng(32);
    std::vector<std::pair<std::string, double>> errors;
    const auto run = [&](const std::string& name, const std::function<TensorD()>& f, std::vector<TensorD> in) {
        errors.emplace_back(name, grad_check(f, std::move(in)).max_relative_error);
    };

    auto a = random_tensor({3, 4}, g), b = random_tensor({4, 5}, g);
    run("matmul", [&] { return project(matmul(a, b)); }, {a, b});

    auto x = random_tensor({2, 3, 5, 7}, g), w = random_tensor({4, 3, 3, 3}, g), bias = random_tensor({4}, g);
    run("conv2d", [&] { return project(conv2d(x, w, bias, {1, 1})); }, {x, w, bias});
    run("conv2d stride 2", [&] { return project(conv2d(x, w, bias, {2, 1})); }, {x, w, bias});

    auto ln = random_tensor({4, 6}, g), gamma = random_tensor({6}, g), beta = random_tensor({6}, g);
    run("layer_norm", [&] { return project(layer_norm(ln, gamma, beta, 1e-5)); }, {ln, gamma, beta});

    auto s = random_tensor({3, 7}, g);
    run("softmax", [&] { return project(softmax(s, 1)); }, {s});
    run("gelu", [&] { return project(gelu(s)); }, {s});

    auto u = random_tensor({1, 2, 3, 4}, g);
    run("upsample2x bilinear", [&] { return project(upsample2x(u, UpsampleMode::bilinear)); }, {u});
    run("upsample2x nearest", [&] { return project(upsample2x(u, UpsampleMode::nearest)); }, {u});

    WindowAttention<double> attn(8, 2, 2, rng);
    auto tokens = random_tensor({3, 4, 8}, g);
    auto mask = window_attention_mask<double>(2, 6, 2, 1, 2, 5);
    run("window_attention",
        [&] { return project(window_attention(tokens, 2, attn.qkv, attn.proj, attn.position_bias(2), mask)); },
        {tokens, attn.qkv.weight, attn.qkv.bias, attn.proj.weight, attn.proj.bias, attn.relative_position_bias_table});

    auto z = random_tensor({2, 4, 5, 6}, g);
    auto t4 = random_target(g, 2, 5, 6, 4);
    run("soft_dice", [&] { return soft_dice(softmax(z, 1), t4, 2); }, {z});
    run("cross_entropy", [&] { return cross_entropy(z, t4); }, {z});

    const auto classes = ClassSet::baseprod();
    auto z8 = random_tensor({2, 8, 4, 5}, g);
    auto t8 = random_target(g, 2, 4, 5, 8);
    run("composite_loss", [&] { return composite_loss(z8, t8, classes); }, {z8});

    double worst_op = 0.0;
    std::string worst_name;
    for (const auto& [name, err] : errors) {
        if (err > worst_op) {
            worst_op = err;
            worst_name = name;
        }
    }

    OmniUnet<double> model(ModelConfig::tiny(), 7);
    auto frames = random_tensor({1, 5, 32, 32}, g, false);
    auto target = random_target(g, 1, 32, 32, 8);
    std::vector<TensorD> params;
    for (const auto& p : model.parameters()) params.push_back(p.tensor);
    const auto e2e = grad_check([&] { return composite_loss(model(frames), target, classes); }, params, 1e-5, 3);

    const double elapsed = seconds_since(t0);
    const bool pass = worst_op < 1e-4 && e2e.combined_relative_error < 1e-3 && elapsed < 120.0;
    return {pass, std::to_string(errors.size()) + " op checks, worst " + worst_name + " " + fmt(worst_op) +
                      "; tiny model " + fmt(e2e.combined_relative_error) + " over " + std::to_string(e2e.checked) +
                      " entries (worst single tensor " + fmt(e2e.max_relative_error) + "); " + fmt(elapsed) + " s"};
}

// ---- 4 -------------------------------------------------------------------

bool bitwise_equal(const TensorD& a, const TensorD& b) {
    return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

Outcome round_trips() {
    std::mt19937_64 g(41);
    std::uniform_int_distribution<int> win(1, 4), mult(1, 3), chan(1, 5), batch(1, 2);
    int failures = 0;
    for (int i = 0; i < 20; ++i) {
        const int w = win(g);
        const std::int64_t h = w * mult(g), wd = w * mult(g);
        auto x = random_tensor({batch(g), h, wd, chan(g)}, g, false);
        if (!bitwise_equal(window_reverse(window_partition(x, w), w, h, wd), x)) ++failures;
        std::uniform_int_distribution<std::int64_t> dy(-h, h), dx(-wd, wd);
        const std::int64_t sy = dy(g), sx = dx(g);
        if (!bitwise_equal(cyclic_shift(cyclic_shift(x, sy, sx), -sy, -sx), x)) ++failures;
    }

    Rng rng(42);
    double gap = 0.0;
    for (int window : {4, 7}) {
        SwinBlock<double> plain(8, 2, window, 4.0, false, rng);
        SwinBlock<double> shifted = plain;
        shifted.shifted = true;
        auto x = random_tensor({2, window, window, 8}, g, false);
        auto a = plain(x), b = shifted(x);
        for (std::size_t k = 0; k < a.values().size(); ++k) gap = std::max(gap, std::abs(a.values()[k] - b.values()[k]));
    }
    return {failures == 0 && gap <= 1e-5, "40 round trips over 20 shapes, " + std::to_string(failures) +
                                              " failures; single-window shifted vs unshifted max gap " + fmt(gap)};
}

// ---- 5 -------------------------------------------------------------------

Outcome shape_contract() {
    std::mt19937_64 g(51);
    OmniUnet<float> model(ModelConfig{}, 5);
    NoGradGuard no_grad;
    std::string detail;
    bool pass = true;
    for (auto [h, w] : {std::pair{64, 64}, std::pair{96, 160}, std::pair{224, 224}, std::pair{72, 100}}) {
        std::normal_distribution<float> dist;
        std::vector<float> v(static_cast<std::size_t>(5 * h * w));
        for (auto& e : v) e = dist(g);
        const auto mask = predict_mask(model(Tensor<float>({1, 5, h, w}, std::move(v))));
        const bool ok = mask.height == h && mask.width == w && mask.batch == 1 &&
                        std::all_of(mask.labels.begin(), mask.labels.end(), [](std::uint8_t l) { return l < 8; });
        pass = pass && ok;
        detail += std::to_string(h) + "x" + std::to_string(w) + (ok ? " ok " : " BAD ");
    }
    return {pass, "default model: " + detail};
}

// ---- 6 -------------------------------------------------------------------

TrainConfig overfit_config(const fs::path& dir, int epochs) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 4;
    c.learning_rate = 1e-3;
    c.seed = 0;
    c.checkpoint_dir = dir;
    return c;
}

Outcome overfit() {
    const auto t0 = Clock::now();
    TempDir dir;
    const auto manifest = synth(dir / "data", SynthMode::terrain, 4, 64, 0);
    const auto samples = load_samples(manifest, manifest.entries);
    OmniUnet<float> model(ModelConfig::tiny(), 0);
    const auto cfg = overfit_config(dir / "run", 300);
    const auto result = train(model, samples, samples, cfg, manifest.classes, manifest.normalization);

    double peak = 0.0;
    int first = -1;
    for (const auto& r : result.log.epochs) {
        const double pa = r.val_total_pa.value_or(0.0);
        peak = std::max(peak, pa);
        if (first < 0 && pa >= 0.95) first = r.epoch;
    }
    const auto best = restore_model(load_checkpoint(*result.best_path));
    const double replay = dataset_loss(best, samples, cfg.batch_size, manifest.classes, cfg.loss);
    const auto report = evaluate(best, samples, manifest.classes, cfg.batch_size);
    const double best_pa = report.total_pa.value_or(0.0);
    const double gap = std::abs(replay - result.best_val_loss);
    const double elapsed = seconds_since(t0);
    const bool pass = best_pa >= 0.95 && gap <= 1e-6 && elapsed < 600.0;
    return {pass, "best checkpoint (epoch " + std::to_string(result.best_epoch) + ") total PA " + fmt(best_pa, 4) +
                      ", first epoch >= 95% " + std::to_string(first) + ", peak " + fmt(peak, 4) +
                      "; reloaded loss gap " + fmt(gap) + "; " + fmt(elapsed) + " s"};
}

// ---- 7 -------------------------------------------------------------------

double thermal_class_accuracy(const std::vector<Sample>& samples, const ClassSet& classes, bool ablate) {
    TempDir dir;
    auto data = samples;
    if (ablate) zero_input_channel(data, 4);
    OmniUnet<float> model(ModelConfig::tiny(), 3);
    auto cfg = overfit_config(dir.path(), 120);
    const auto result = train(model, data, data, cfg, classes, Normalization{});
    const auto best = restore_model(result.best);
    const auto conf = confusion(best, data, cfg.batch_size, classes.size());
    std::vector<int> excluded;
    for (int c = 0; c < classes.size(); ++c) {
        if (std::find(kThermalOnlyClasses.begin(), kThermalOnlyClasses.end(), c) == kThermalOnlyClasses.end()) {
            excluded.push_back(c);
        }
    }
    return total_pa(conf, excluded).value_or(0.0);
}

Outcome modality() {
    const auto t0 = Clock::now();
    TempDir dir;
    const auto manifest = synth(dir / "data", SynthMode::thermal_only, 4, 64, 1);
    const auto samples = load_samples(manifest, manifest.entries);
    const double with = thermal_class_accuracy(samples, manifest.classes, false);
    const double without = thermal_class_accuracy(samples, manifest.classes, true);
    return {with > 0.90 && without <= 0.60, "thermal-class accuracy " + fmt(with, 4) + " with thermal, " +
                                                fmt(without, 4) + " with thermal zeroed; " + fmt(seconds_since(t0)) +
                                                " s"};
}

// ---- 8 -------------------------------------------------------------------

Outcome determinism() {
    TempDir dir;
    const auto manifest = synth(dir / "data", SynthMode::terrain, 4, 32, 8);
    const auto samples = load_samples(manifest, manifest.entries);
    const auto [tr, va] = split_dataset(samples, 0.75, 0);
    std::vector<nlohmann::json> logs;
    for (const char* name : {"a", "b"}) {
        OmniUnet<float> model(ModelConfig::tiny(), 11);
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 2;
        cfg.learning_rate = 1e-3;
        cfg.seed = 11;
        cfg.checkpoint_dir = dir / name;
        train(model, tr, va, cfg, manifest.classes, manifest.normalization);
        auto lines = nlohmann::json::array();
        std::ifstream in(dir / name / "train_log.jsonl");
        for (std::string line; std::getline(in, line);) {
            auto rec = nlohmann::json::parse(line);
            rec.erase("wall_time");
            lines.push_back(rec);
        }
        logs.push_back(lines);
    }
    const bool same_log = logs[0] == logs[1] && logs[0].size() == 3;
    const bool same_best = slurp(dir / "a" / "best.ckpt") == slurp(dir / "b" / "best.ckpt");
    const bool same_last = slurp(dir / "a" / "last.ckpt") == slurp(dir / "b" / "last.ckpt");
    return {same_log && same_best && same_last,
            std::string("logs ") + (same_log ? "identical" : "DIFFER") + " (wall_time excluded), best.ckpt " +
                (same_best ? "identical" : "DIFFERS") + ", last.ckpt " + (same_last ? "identical" : "DIFFERS")};
}

// ---- 9 -------------------------------------------------------------------

Outcome cli_smoke() {
    TempDir dir;
    const std::string exe = OMNIUNET_CLI;
    const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
    const auto manifest = q(dir / "data" / "manifest.jsonl");
    const auto ckpt = q(dir / "train" / "best.ckpt");
    const std::vector<std::pair<std::string, std::string>> steps = {
        {"synth", "dataset synth --out " + q(dir / "data") + " --frames 5 --height 48 --width 64"},
        {"validate", "dataset validate --manifest " + manifest},
        {"train", "train --manifest " + manifest + " --out " + q(dir / "train") +
                      " --set model.preset=tiny --epochs 2 --batch-size 2 --lr 1e-3"},
        {"eval", "eval --checkpoint " + ckpt + " --manifest " + manifest + " --out " + q(dir / "eval")},
        {"infer", "infer --checkpoint " + ckpt + " --manifest " + manifest + " --out " + q(dir / "infer")},
        {"bench", "bench --checkpoint " + ckpt + " --manifest " + manifest + " --n 3 --warmup 1 --out " +
                      q(dir / "bench")},
    };
    std::string detail;
    bool pass = true;
    for (const auto& [name, args] : steps) {
        const int status = std::system((q(exe) + " " + args + " > " + q(dir / (name + ".log")) + " 2>&1").c_str());
        detail += name + "=" + std::to_string(status) + " ";
        pass = pass && status == 0;
    }
    const bool report = fs::exists(dir / "bench" / "latency.json");
    if (report) {
        const auto j = nlohmann::json::parse(slurp(dir / "bench" / "latency.json"));
        detail += "latency mean " + fmt(j.at("mean_ms").get<double>()) + " ms";
    }
    return {pass && report && fs::exists(dir / "eval" / "metrics.json"), "exit codes " + detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"metric oracle equivalence", metric_oracle},
        {"dice-jaccard identity", dice_jaccard},
        {"gradient correctness", gradients},
        {"structural round trips", round_trips},
        {"shape contract", shape_contract},
        {"overfit oracle", overfit},
        {"modality sensitivity", modality},
        {"determinism", determinism},
        {"cli smoke", cli_smoke},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        if (!out.pass) ++failed;
        std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << id << " " << criteria[i].first << ": "
                  << out.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
