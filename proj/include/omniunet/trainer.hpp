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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omniunet/checkpoint.hpp"
#include "omniunet/dataset.hpp"
#include "omniunet/losses.hpp"
#include "omniunet/metrics.hpp"
#include "omniunet/model.hpp"
#include "omniunet/optimizer.hpp"

namespace omniunet {

struct TrainConfig {
    int epochs = 50;
    int batch_size = 16;
    double learning_rate = 2e-5;
    double split_ratio = 0.8;
    std::uint64_t seed = 0;
    AdamWConfig optimizer;
    double clip_norm = 1.0;  // global gradient norm; <= 0 disables clipping
    LossOptions loss;
    std::filesystem::path checkpoint_dir;  // empty: keep the best state in memory only

    void validate() const;  // ConfigError
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::optional<double> val_total_pa;
    std::optional<double> val_mean_iou;
    double wall_time = 0.0;  // seconds since training started
};

nlohmann::json epoch_record_to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

struct TrainLog {
    std::vector<EpochRecord> epochs;

    // argmin of val_loss, earliest on ties; -1 when empty.
    int best_epoch() const;
};

void write_train_log(const TrainLog& log, const std::filesystem::path& path);
TrainLog read_train_log(const std::filesystem::path& path);

struct TrainResult {
    TrainLog log;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    Checkpoint best;  // also written as best.ckpt when checkpoint_dir is set
    std::optional<std::filesystem::path> best_path;
    std::optional<std::filesystem::path> last_path;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Runs cfg.epochs epochs of shuffled mini-batch AdamW on the composite loss.
/// After each epoch the validation loss and metrics are computed with frozen
/// parameters; the state with the lowest validation loss is kept. The model
/// ends with the last-epoch parameters.
///
/// A non-finite training loss aborts with a TrainingError naming the batch.
TrainResult train(OmniUnet<float>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const ClassSet& classes, const Normalization& normalization,
                  const EpochCallback& on_epoch = {});

// Mean composite loss over `samples`, batched in order and weighted by batch
// size. Does not record a graph.
double dataset_loss(const OmniUnet<float>& model, const std::vector<Sample>& samples, int batch_size,
                    const ClassSet& classes, LossOptions options = {});

// One confusion matrix over all frames. Unlabeled samples are a DataError.
ConfusionMatrix confusion(const OmniUnet<float>& model, const std::vector<Sample>& samples, int batch_size,
                          int num_classes);

MetricsReport evaluate(const OmniUnet<float>& model, const std::vector<Sample>& samples, const ClassSet& classes,
                       int batch_size = 16, ReportOptions options = {});

// Order-sensitive FNV-1a digest of all parameter values.
std::uint64_t parameter_checksum(const OmniUnet<float>& model);

}  // namespace omniunet
