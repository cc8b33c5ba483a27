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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omniunet/class_set.hpp"
#include "omniunet/label_mask.hpp"

namespace omniunet {

/// K x K pixel counts, counts(g, p) = pixels with ground truth g predicted p.
///
/// For class c: TP = counts(c, c), FP = column c minus TP, FN = row c minus
/// TP, TN = everything else.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes);

    int num_classes() const { return k_; }
    std::uint64_t count(int truth, int predicted) const;
    std::uint64_t total() const;

    std::uint64_t true_positives(int c) const;
    std::uint64_t false_positives(int c) const;
    std::uint64_t false_negatives(int c) const;
    std::uint64_t true_negatives(int c) const;

    // Adds every pixel whose ground truth is not listed in `ignore`.
    void accumulate(const LabelMask& predicted, const LabelMask& truth,
                    const std::vector<int>& ignore = {});
    void add(int truth, int predicted, std::uint64_t n = 1);

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    bool operator==(const ConfusionMatrix&) const = default;

private:
    int k_;
    std::vector<std::uint64_t> counts_;
};

// Per-class metrics. std::nullopt is the "undefined" sentinel (zero
// denominator) that the mean aggregations skip.
std::optional<double> dice_coefficient(const ConfusionMatrix& conf, int c);
std::optional<double> iou(const ConfusionMatrix& conf, int c);
// (TP + TN) / (TP + TN + FP + FN).
std::optional<double> pixel_accuracy(const ConfusionMatrix& conf, int c);
// TP / (TP + FN).
std::optional<double> class_recall(const ConfusionMatrix& conf, int c);

enum class PixelAccuracyMode {
    recall,        // TP / (TP + FN); the default per-class "pixel accuracy"
    tn_inclusive,  // (TP + TN) / total
};

// Correct pixels / all pixels, both restricted to ground truth outside `excluded`.
std::optional<double> total_pa(const ConfusionMatrix& conf, const std::vector<int>& excluded = {});
std::optional<double> mean_pa(const ConfusionMatrix& conf, const std::vector<int>& excluded = {},
                              PixelAccuracyMode mode = PixelAccuracyMode::recall);
std::optional<double> mean_iou(const ConfusionMatrix& conf, const std::vector<int>& excluded = {});
std::optional<double> mean_dice(const ConfusionMatrix& conf, const std::vector<int>& excluded = {});

struct ReportOptions {
    PixelAccuracyMode pa_mode = PixelAccuracyMode::recall;
    // Drops void ground-truth pixels from total PA as well as from the means.
    bool exclude_void_from_total = false;
};

struct MetricsReport {
    std::vector<std::string> class_names;
    std::vector<std::optional<double>> per_class_pa;
    std::optional<double> total_pa;
    std::optional<double> mean_pa;
    std::optional<double> mean_iou;
    std::optional<double> mean_dice;
    std::vector<int> excluded_classes;
    PixelAccuracyMode pa_mode = PixelAccuracyMode::recall;
    std::uint64_t evaluated_pixels = 0;
};

MetricsReport make_report(const ConfusionMatrix& conf, const ClassSet& classes, ReportOptions options = {});

// Text table: one column per class ("Class Pixel Accuracy"), then
// Total PA / Mean PA / Mean IoU ("Average Metrics"), values in percent.
std::string format_table(const MetricsReport& report);
nlohmann::json report_to_json(const MetricsReport& report);

}  // namespace omniunet
