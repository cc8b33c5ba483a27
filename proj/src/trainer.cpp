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

#include "omniunet/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "omniunet/error.hpp"

namespace omniunet {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0, 1)");
    if (!(loss.dice_smoothing >= 0.0)) throw ConfigError("dice_smoothing must be >= 0");
}

void to_json(json& j, const TrainConfig& c) {
    j = {{"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"learning_rate", c.learning_rate},
         {"split_ratio", c.split_ratio},
         {"seed", c.seed},
         {"optimizer", c.optimizer},
         {"clip_norm", c.clip_norm},
         {"dice_smoothing", c.loss.dice_smoothing},
         {"checkpoint_dir", c.checkpoint_dir.string()}};
}

void from_json(const json& j, TrainConfig& c) {
    TrainConfig d;
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.split_ratio = j.value("split_ratio", d.split_ratio);
    c.seed = j.value("seed", d.seed);
    c.optimizer = j.value("optimizer", d.optimizer);
    c.clip_norm = j.value("clip_norm", d.clip_norm);
    c.loss.dice_smoothing = j.value("dice_smoothing", d.loss.dice_smoothing);
    c.checkpoint_dir = j.value("checkpoint_dir", std::string{});
}

json epoch_record_to_json(const EpochRecord& r) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"epoch", r.epoch},           {"train_loss", r.train_loss},
            {"val_loss", r.val_loss},     {"val_total_pa", opt(r.val_total_pa)},
            {"val_mean_iou", opt(r.val_mean_iou)}, {"wall_time", r.wall_time}};
}

EpochRecord epoch_record_from_json(const json& j) {
    auto opt = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>();
    };
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.train_loss = j.at("train_loss").get<double>();
    r.val_loss = j.at("val_loss").get<double>();
    r.val_total_pa = opt("val_total_pa");
    r.val_mean_iou = opt("val_mean_iou");
    r.wall_time = j.value("wall_time", 0.0);
    return r;
}

int TrainLog::best_epoch() const {
    int best = -1;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        if (best < 0 || epochs[i].val_loss < epochs[static_cast<std::size_t>(best)].val_loss) best = static_cast<int>(i);
    }
    return best < 0 ? -1 : epochs[static_cast<std::size_t>(best)].epoch;
}

void write_train_log(const TrainLog& log, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw TrainingError("cannot create " + path.string());
    for (const auto& r : log.epochs) out << epoch_record_to_json(r).dump() << '\n';
}

TrainLog read_train_log(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    TrainLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) log.epochs.push_back(epoch_record_from_json(json::parse(line)));
    }
    return log;
}

namespace {

std::vector<std::size_t> range_batch(std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < end; ++i) idx.push_back(i);
    return idx;
}

std::string join_ids(const std::vector<std::string>& ids) {
    std::string s;
    for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
    return s;
}

struct ValidationPass {
    double loss;
    ConfusionMatrix conf;
};

// Loss and confusion from one forward pass per batch; matches dataset_loss
// and confusion exactly.
ValidationPass validation_pass(const OmniUnet<float>& model, const std::vector<Sample>& samples, int batch_size,
                               const ClassSet& classes, LossOptions options) {
    NoGradGuard no_grad;
    ValidationPass out{0.0, ConfusionMatrix(classes.size())};
    const auto bs = static_cast<std::size_t>(batch_size);
    for (std::size_t i = 0; i < samples.size(); i += bs) {
        const Batch b = make_batch(samples, range_batch(i, std::min(samples.size(), i + bs)));
        const Tensor<float> logits = model(b.inputs);
        out.loss += composite_loss(logits, b.labels, classes, options).item() * static_cast<double>(b.ids.size());
        out.conf.accumulate(predict_mask(logits), b.labels);
    }
    out.loss /= static_cast<double>(samples.size());
    return out;
}

}  // namespace

double dataset_loss(const OmniUnet<float>& model, const std::vector<Sample>& samples, int batch_size,
                    const ClassSet& classes, LossOptions options) {
    if (samples.empty()) throw DataError("loss over an empty set");
    NoGradGuard no_grad;
    double total = 0.0;
    const auto bs = static_cast<std::size_t>(batch_size);
    for (std::size_t i = 0; i < samples.size(); i += bs) {
        const Batch b = make_batch(samples, range_batch(i, std::min(samples.size(), i + bs)));
        const double loss = composite_loss(model(b.inputs), b.labels, classes, options).item();
        total += loss * static_cast<double>(b.ids.size());
    }
    return total / static_cast<double>(samples.size());
}

ConfusionMatrix confusion(const OmniUnet<float>& model, const std::vector<Sample>& samples, int batch_size,
                          int num_classes) {
    NoGradGuard no_grad;
    ConfusionMatrix conf(num_classes);
    const auto bs = static_cast<std::size_t>(batch_size);
    for (std::size_t i = 0; i < samples.size(); i += bs) {
        const Batch b = make_batch(samples, range_batch(i, std::min(samples.size(), i + bs)));
        conf.accumulate(predict_mask(model(b.inputs)), b.labels);
    }
    return conf;
}

MetricsReport evaluate(const OmniUnet<float>& model, const std::vector<Sample>& samples, const ClassSet& classes,
                       int batch_size, ReportOptions options) {
    if (model.config().num_classes != classes.size()) {
        throw ConfigError("model predicts " + std::to_string(model.config().num_classes) + " classes, class set has " +
                          std::to_string(classes.size()));
    }
    return make_report(confusion(model, samples, batch_size, classes.size()), classes, options);
}

std::uint64_t parameter_checksum(const OmniUnet<float>& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : model.parameters()) {
        const auto v = p.tensor.values();
        h ^= fnv1a64(v.data(), v.size_bytes());
        h *= 0x100000001b3ULL;
    }
    return h;
}

TrainResult train(OmniUnet<float>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const ClassSet& classes, const Normalization& normalization,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.empty()) throw DataError("training set is empty");
    if (val_set.empty()) throw DataError("validation set is empty");
    if (model.config().num_classes != classes.size()) {
        throw ConfigError("model predicts " + std::to_string(model.config().num_classes) + " classes, class set has " +
                          std::to_string(classes.size()));
    }
    if (!cfg.checkpoint_dir.empty()) fs::create_directories(cfg.checkpoint_dir);

    auto& params = model.parameters();
    params.zero_grad();
    AdamW<float> optimizer(params, cfg.learning_rate, cfg.optimizer);
    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    const auto start = std::chrono::steady_clock::now();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (const auto& idx : batch_plan(train_set.size(), static_cast<std::size_t>(cfg.batch_size), cfg.seed,
                                          static_cast<std::uint64_t>(epoch))) {
            const Batch b = make_batch(train_set, idx);
            Tensor<float> loss = composite_loss(model(b.inputs), b.labels, classes, cfg.loss);
            const double value = loss.item();
            if (!std::isfinite(value)) {
                throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + " on batch [" +
                                    join_ids(b.ids) + "]");
            }
            loss.backward();
            clip_grad_norm(params, cfg.clip_norm);
            optimizer.step();
            loss_sum += value * static_cast<double>(b.ids.size());
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_set.size());
        const ValidationPass val = validation_pass(model, val_set, cfg.batch_size, classes, cfg.loss);
        rec.val_loss = val.loss;
        const MetricsReport report = make_report(val.conf, classes);
        rec.val_total_pa = report.total_pa;
        rec.val_mean_iou = report.mean_iou;
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.epochs.push_back(rec);

        const json meta = {{"epoch", epoch}, {"val_loss", rec.val_loss}, {"train_loss", rec.train_loss}};
        if (rec.val_loss < result.best_val_loss) {
            result.best_val_loss = rec.val_loss;
            result.best_epoch = epoch;
            result.best = make_checkpoint(model, classes, normalization, meta);
            if (!cfg.checkpoint_dir.empty()) {
                result.best_path = cfg.checkpoint_dir / "best.ckpt";
                save_checkpoint(result.best, *result.best_path);
            }
        }
        if (!cfg.checkpoint_dir.empty()) {
            write_train_log(result.log, cfg.checkpoint_dir / "train_log.jsonl");
            if (epoch + 1 == cfg.epochs) {
                result.last_path = cfg.checkpoint_dir / "last.ckpt";
                save_checkpoint(make_checkpoint(model, classes, normalization, meta), *result.last_path);
            }
        }
        if (on_epoch) on_epoch(rec);
    }
    return result;
}

}  // namespace omniunet
