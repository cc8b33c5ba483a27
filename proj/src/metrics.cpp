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

#include "omniunet/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "omniunet/error.hpp"

namespace omniunet {

namespace {

bool contains(const std::vector<int>& v, int c) { return std::find(v.begin(), v.end(), c) != v.end(); }

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> mean_of(const ConfusionMatrix& conf, const std::vector<int>& excluded,
                              std::optional<double> (*metric)(const ConfusionMatrix&, int)) {
    double acc = 0.0;
    int n = 0;
    for (int c = 0; c < conf.num_classes(); ++c) {
        if (contains(excluded, c)) continue;
        if (auto v = metric(conf, c)) {
            acc += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return acc / n;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
    if (num_classes < 1) throw ConfigError("confusion matrix needs at least one class");
    counts_.assign(static_cast<std::size_t>(k_) * static_cast<std::size_t>(k_), 0);
}

std::uint64_t ConfusionMatrix::count(int truth, int predicted) const {
    return counts_.at(static_cast<std::size_t>(truth * k_ + predicted));
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto v : counts_) t += v;
    return t;
}

std::uint64_t ConfusionMatrix::true_positives(int c) const { return count(c, c); }

std::uint64_t ConfusionMatrix::false_positives(int c) const {
    std::uint64_t col = 0;
    for (int g = 0; g < k_; ++g) col += count(g, c);
    return col - count(c, c);
}

std::uint64_t ConfusionMatrix::false_negatives(int c) const {
    std::uint64_t row = 0;
    for (int p = 0; p < k_; ++p) row += count(c, p);
    return row - count(c, c);
}

std::uint64_t ConfusionMatrix::true_negatives(int c) const {
    return total() - true_positives(c) - false_positives(c) - false_negatives(c);
}

void ConfusionMatrix::add(int truth, int predicted, std::uint64_t n) {
    if (truth < 0 || truth >= k_ || predicted < 0 || predicted >= k_) {
        throw DataError("confusion matrix: class pair (" + std::to_string(truth) + ", " +
                        std::to_string(predicted) + ") out of range for " + std::to_string(k_) + " classes");
    }
    counts_[static_cast<std::size_t>(truth * k_ + predicted)] += n;
}

void ConfusionMatrix::accumulate(const LabelMask& predicted, const LabelMask& truth,
                                 const std::vector<int>& ignore) {
    if (!predicted.same_extent(truth)) throw DataError("confusion matrix: prediction and ground truth extents differ");
    std::vector<bool> skip(256, false);
    for (int c : ignore) {
        if (c >= 0 && c < 256) skip[static_cast<std::size_t>(c)] = true;
    }
    for (std::size_t i = 0; i < truth.labels.size(); ++i) {
        const int g = truth.labels[i];
        if (skip[static_cast<std::size_t>(g)]) continue;
        add(g, predicted.labels[i]);
    }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.k_ != k_) throw DataError("cannot merge confusion matrices of different class counts");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

std::optional<double> dice_coefficient(const ConfusionMatrix& conf, int c) {
    const auto tp = conf.true_positives(c);
    return ratio(2 * tp, 2 * tp + conf.false_positives(c) + conf.false_negatives(c));
}

std::optional<double> iou(const ConfusionMatrix& conf, int c) {
    const auto tp = conf.true_positives(c);
    return ratio(tp, tp + conf.false_positives(c) + conf.false_negatives(c));
}

std::optional<double> pixel_accuracy(const ConfusionMatrix& conf, int c) {
    return ratio(conf.true_positives(c) + conf.true_negatives(c), conf.total());
}

std::optional<double> class_recall(const ConfusionMatrix& conf, int c) {
    const auto tp = conf.true_positives(c);
    return ratio(tp, tp + conf.false_negatives(c));
}

std::optional<double> total_pa(const ConfusionMatrix& conf, const std::vector<int>& excluded) {
    std::uint64_t correct = 0, all = 0;
    for (int g = 0; g < conf.num_classes(); ++g) {
        if (contains(excluded, g)) continue;
        correct += conf.count(g, g);
        for (int p = 0; p < conf.num_classes(); ++p) all += conf.count(g, p);
    }
    return ratio(correct, all);
}

std::optional<double> mean_pa(const ConfusionMatrix& conf, const std::vector<int>& excluded,
                              PixelAccuracyMode mode) {
    if (mode == PixelAccuracyMode::recall) return mean_of(conf, excluded, &class_recall);
    // The TN-inclusive form is defined once any pixel exists; classes absent
    // from both ground truth and prediction are still skipped.
    return mean_of(conf, excluded, [](const ConfusionMatrix& m, int c) -> std::optional<double> {
        if (m.true_positives(c) + m.false_positives(c) + m.false_negatives(c) == 0) return std::nullopt;
        return pixel_accuracy(m, c);
    });
}

std::optional<double> mean_iou(const ConfusionMatrix& conf, const std::vector<int>& excluded) {
    return mean_of(conf, excluded, &iou);
}

std::optional<double> mean_dice(const ConfusionMatrix& conf, const std::vector<int>& excluded) {
    return mean_of(conf, excluded, &dice_coefficient);
}

MetricsReport make_report(const ConfusionMatrix& conf, const ClassSet& classes, ReportOptions options) {
    if (conf.num_classes() != classes.size()) {
        throw DataError("confusion matrix has " + std::to_string(conf.num_classes()) +
                        " classes but the class set has " + std::to_string(classes.size()));
    }
    MetricsReport r;
    r.class_names = classes.names();
    r.pa_mode = options.pa_mode;
    r.excluded_classes = {classes.void_index()};
    for (int c = 0; c < classes.size(); ++c) {
        r.per_class_pa.push_back(options.pa_mode == PixelAccuracyMode::recall ? class_recall(conf, c)
                                                                              : pixel_accuracy(conf, c));
    }
    const std::vector<int> total_excluded =
        options.exclude_void_from_total ? r.excluded_classes : std::vector<int>{};
    r.total_pa = total_pa(conf, total_excluded);
    r.mean_pa = mean_pa(conf, r.excluded_classes, options.pa_mode);
    r.mean_iou = mean_iou(conf, r.excluded_classes);
    r.mean_dice = mean_dice(conf, r.excluded_classes);
    for (int g = 0; g < conf.num_classes(); ++g) {
        if (contains(total_excluded, g)) continue;
        for (int p = 0; p < conf.num_classes(); ++p) r.evaluated_pixels += conf.count(g, p);
    }
    return r;
}

std::string format_table(const MetricsReport& report) {
    auto cell = [](const std::optional<double>& v, int width) {
        char buf[32];
        if (v) {
            std::snprintf(buf, sizeof buf, "%*.2f", width, *v * 100.0);
        } else {
            std::snprintf(buf, sizeof buf, "%*s", width, "-");
        }
        return std::string(buf);
    };
    auto pad = [](const std::string& s, int width) {
        return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), ' ') + s;
    };
    std::vector<int> widths;
    for (const auto& name : report.class_names) widths.push_back(std::max(8, static_cast<int>(name.size()) + 1));
    int class_block = 0;
    for (int w : widths) class_block += w;

    std::ostringstream out;
    const std::string left_title = "Class Pixel Accuracy";
    out << left_title << std::string(static_cast<std::size_t>(std::max(1, class_block - static_cast<int>(left_title.size()))), ' ')
        << " | Average Metrics\n";
    for (std::size_t c = 0; c < report.class_names.size(); ++c) out << pad(report.class_names[c], widths[c]);
    out << " | " << pad("Total PA", 9) << pad("Mean PA", 9) << pad("Mean IoU", 9) << '\n';
    for (std::size_t c = 0; c < report.per_class_pa.size(); ++c) out << cell(report.per_class_pa[c], widths[c]);
    out << " | " << cell(report.total_pa, 9) << cell(report.mean_pa, 9) << cell(report.mean_iou, 9) << '\n';
    return out.str();
}

nlohmann::json report_to_json(const MetricsReport& report) {
    auto value = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json per_class = nlohmann::json::object();
    nlohmann::json order = nlohmann::json::array();
    for (std::size_t c = 0; c < report.class_names.size(); ++c) {
        per_class[report.class_names[c]] = value(report.per_class_pa[c]);
        order.push_back(report.class_names[c]);
    }
    nlohmann::json excluded = nlohmann::json::array();
    for (int c : report.excluded_classes) excluded.push_back(report.class_names.at(static_cast<std::size_t>(c)));
    return {{"classes", order},
            {"per_class_pa", per_class},
            {"total_pa", value(report.total_pa)},
            {"mean_pa", value(report.mean_pa)},
            {"mean_iou", value(report.mean_iou)},
            {"mean_dice", value(report.mean_dice)},
            {"excluded_classes", excluded},
            {"pixel_accuracy_mode", report.pa_mode == PixelAccuracyMode::recall ? "recall" : "tn_inclusive"},
            {"evaluated_pixels", report.evaluated_pixels}};
}

}  // namespace omniunet
