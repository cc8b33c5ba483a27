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

#include <cmath>
#include <random>
#include <string>

#include "doctest.h"
#include "omniunet/error.hpp"
#include "omniunet/losses.hpp"
#include "omniunet/metrics.hpp"
#include "omniunet/ops.hpp"
#include "support/brute_metrics.hpp"
#include "support/gradcheck.hpp"

using namespace omniunet;
using namespace omniunet::testing;

namespace {

LabelMask random_mask(std::mt19937_64& rng, std::int64_t n, std::int64_t h, std::int64_t w, int k) {
    LabelMask m(n, h, w);
    std::uniform_int_distribution<int> cls(0, k - 1);
    for (auto& v : m.labels) v = static_cast<std::uint8_t>(cls(rng));
    return m;
}

// Scalar re-evaluation of the composite loss straight from its definition.
double reference_composite(const TensorD& logits, const LabelMask& target, int void_index, double eps) {
    const auto n = logits.dim(0), k = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
    auto z = logits.values();
    std::vector<double> p(z.size());
    double ce = 0;
    for (std::int64_t b = 0; b < n; ++b) {
        for (std::int64_t i = 0; i < plane; ++i) {
            double s = 0;
            for (std::int64_t c = 0; c < k; ++c) s += std::exp(z[static_cast<std::size_t>((b * k + c) * plane + i)]);
            for (std::int64_t c = 0; c < k; ++c) {
                const auto at = static_cast<std::size_t>((b * k + c) * plane + i);
                p[at] = std::exp(z[at]) / s;
            }
            const int t = target.labels[static_cast<std::size_t>(b * plane + i)];
            ce -= std::log(p[static_cast<std::size_t>((b * k + t) * plane + i)]);
        }
    }
    ce /= static_cast<double>(n * plane);
    double dice = 0;
    for (std::int64_t c = 0; c < k; ++c) {
        if (c == void_index) continue;
        double inter = 0, ps = 0, gs = 0;
        for (std::int64_t b = 0; b < n; ++b) {
            for (std::int64_t i = 0; i < plane; ++i) {
                const double pv = p[static_cast<std::size_t>((b * k + c) * plane + i)];
                const bool g = target.labels[static_cast<std::size_t>(b * plane + i)] == c;
                inter += g ? pv : 0.0;
                ps += pv;
                gs += g ? 1.0 : 0.0;
            }
        }
        dice += 1.0 - (2 * inter + eps) / (ps + gs + eps);
    }
    return ce + dice / static_cast<double>(k - 1);
}

}  // namespace

TEST_CASE("cross_entropy") {
    LabelMask target(2, 3, 4, 5);
    CHECK(cross_entropy(TensorD::zeros({2, 8, 3, 4}), target).item() == doctest::Approx(std::log(8.0)));

    // Confident and correct -> near zero; confident and wrong -> the margin.
    TensorD logits({1, 2, 1, 1}, {10.0, -10.0});
    LabelMask zero(1, 1, 1, 0), one(1, 1, 1, 1);
    CHECK(cross_entropy(logits, zero).item() == doctest::Approx(std::log1p(std::exp(-20.0))));
    CHECK(cross_entropy(logits, one).item() == doctest::Approx(20.0).epsilon(1e-8));

    CHECK_THROWS_AS(cross_entropy(TensorD::zeros({2, 3, 3, 4}), target), DataError);
    CHECK_THROWS_AS(cross_entropy(TensorD::zeros({2, 8, 3, 5}), target), DataError);

    std::mt19937_64 g(1);
    auto z = random_tensor({2, 4, 3, 3}, g);
    auto t = random_mask(g, 2, 3, 3, 4);
    CHECK(grad_check([&] { return cross_entropy(z, t); }, {z}).max_relative_error < 1e-4);
}

TEST_CASE("soft_dice") {
    SUBCASE("uniform prediction against a single-class target") {
        for (int k : {2, 4, 8}) {
            auto probs = TensorD::full({1, k, 4, 4}, 1.0 / k);
            LabelMask target(1, 4, 4, 1);
            CHECK(soft_dice(probs, target, 1, 0.0).item() == doctest::Approx(2.0 / (k + 1)));
        }
    }
    SUBCASE("perfect prediction") {
        auto probs = TensorD::zeros({1, 3, 2, 2});
        LabelMask target(1, 2, 2);
        target.labels = {0, 1, 2, 1};
        auto v = probs.mutable_values();
        for (int i = 0; i < 4; ++i) v[static_cast<std::size_t>(target.labels[static_cast<std::size_t>(i)] * 4 + i)] = 1.0;
        for (int c = 0; c < 3; ++c) CHECK(soft_dice(probs, target, c, 0.0).item() == doctest::Approx(1.0));
        // Absent class with smoothing: (0 + 1) / (0 + 0 + 1).
        LabelMask all0(1, 2, 2, 0);
        auto p0 = TensorD::zeros({1, 3, 2, 2});
        CHECK(soft_dice(p0, all0, 2).item() == 1.0);
        CHECK_THROWS_AS(soft_dice(p0, all0, 2, 0.0), DataError);
    }
    SUBCASE("gradient") {
        std::mt19937_64 g(2);
        auto z = random_tensor({2, 3, 4, 4}, g);
        auto t = random_mask(g, 2, 4, 4, 3);
        for (int c = 0; c < 3; ++c) {
            auto r = grad_check([&] { return soft_dice(softmax(z, 1), t, c); }, {z});
            CHECK(r.max_relative_error < 1e-4);
        }
    }
}

TEST_CASE("composite_loss") {
    auto classes = ClassSet::baseprod();
    SUBCASE("uniform logits closed form") {
        const int k = 8, h = 4, w = 8;
        const double hw = h * w;
        LabelMask target(1, h, w, 3);
        const double ce = std::log(static_cast<double>(k));
        const double d_target = (2 * hw / k + 1) / (hw / k + hw + 1);
        const double d_other = 1 / (hw / k + 1);
        const double expected = ce + ((1 - d_target) + (k - 2) * (1 - d_other)) / (k - 1);
        CHECK(composite_loss(TensorD::zeros({1, k, h, w}), target, classes).item() == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("matches a scalar re-evaluation") {
        std::mt19937_64 g(3);
        for (int trial = 0; trial < 5; ++trial) {
            auto z = random_tensor({2, 8, 3, 5}, g, false, 2.0);
            auto t = random_mask(g, 2, 3, 5, 8);
            for (double eps : {1.0, 1e-3}) {
                CHECK(composite_loss(z, t, classes, LossOptions{eps}).item() ==
                      doctest::Approx(reference_composite(z, t, 0, eps)).epsilon(1e-12));
            }
        }
    }
    SUBCASE("void is left out of the dice term") {
        // All-void target with a perfect void prediction: every non-void dice
        // sees an empty class and predicts nothing, so it scores 1.
        auto z = TensorD::full({1, 8, 2, 2}, -30.0);
        for (int i = 0; i < 4; ++i) z.mutable_values()[static_cast<std::size_t>(i)] = 30.0;
        LabelMask target(1, 2, 2, 0);
        CHECK(composite_loss(z, target, classes).item() < 1e-6);
    }
    SUBCASE("gradient") {
        std::mt19937_64 g(4);
        auto z = random_tensor({1, 8, 4, 4}, g);
        auto t = random_mask(g, 1, 4, 4, 8);
        CHECK(grad_check([&] { return composite_loss(z, t, classes); }, {z}).max_relative_error < 1e-4);
    }
    SUBCASE("class count mismatch") {
        CHECK_THROWS_AS(composite_loss(TensorD::zeros({1, 5, 2, 2}), LabelMask(1, 2, 2), classes), DimensionError);
    }
}

TEST_CASE("confusion matrix against the brute-force counter") {
    std::mt19937_64 g(5);
    const int k = 8;
    for (int trial = 0; trial < 100; ++trial) {
        auto [pred, gt] = random_mask_pair(g, 32, 32, k);
        ConfusionMatrix conf(k);
        conf.accumulate(pred, gt);
        CHECK(conf.total() == 32u * 32u);
        for (int c = 0; c < k; ++c) {
            auto b = brute_counts(pred, gt, c);
            CHECK(conf.true_positives(c) == b.tp);
            CHECK(conf.false_positives(c) == b.fp);
            CHECK(conf.false_negatives(c) == b.fn);
            CHECK(conf.true_negatives(c) == b.tn);
            CHECK(dice_coefficient(conf, c) == brute_dice(pred, gt, c));
            CHECK(iou(conf, c) == brute_iou(pred, gt, c));
            CHECK(pixel_accuracy(conf, c) == brute_pa(pred, gt, c));
            CHECK(class_recall(conf, c) == brute_recall(pred, gt, c));
            auto d = dice_coefficient(conf, c);
            auto j = iou(conf, c);
            if (d && j) CHECK(*d == doctest::Approx(2 * *j / (1 + *j)).epsilon(1e-15));
        }
        for (const std::vector<int>& ex : {std::vector<int>{}, std::vector<int>{0}}) {
            CHECK(total_pa(conf, ex) == brute_total_pa(pred, gt, ex));
            CHECK(mean_iou(conf, ex) == brute_mean(k, ex, [&](int c) { return brute_iou(pred, gt, c); }));
            CHECK(mean_dice(conf, ex) == brute_mean(k, ex, [&](int c) { return brute_dice(pred, gt, c); }));
            CHECK(mean_pa(conf, ex) == brute_mean(k, ex, [&](int c) { return brute_recall(pred, gt, c); }));
        }
    }
}

TEST_CASE("confusion matrix bookkeeping") {
    std::mt19937_64 g(6);
    auto [p1, g1] = random_mask_pair(g, 8, 8, 4);
    auto [p2, g2] = random_mask_pair(g, 8, 8, 4);
    ConfusionMatrix a(4), b(4), both(4);
    a.accumulate(p1, g1);
    b.accumulate(p2, g2);
    both.accumulate(p1, g1);
    both.accumulate(p2, g2);
    a += b;
    CHECK(a == both);

    ConfusionMatrix ignoring(4);
    ignoring.accumulate(p1, g1, {0});
    for (int p = 0; p < 4; ++p) CHECK(ignoring.count(0, p) == 0);
    CHECK(ignoring.count(1, 1) == both.count(1, 1) - [&] {
              ConfusionMatrix only2(4);
              only2.accumulate(p2, g2);
              return only2.count(1, 1);
          }());

    CHECK_THROWS_AS(a.accumulate(LabelMask(1, 2, 2), LabelMask(1, 2, 3)), DataError);
    CHECK_THROWS_AS(a.add(4, 0), DataError);
    ConfusionMatrix other(3);
    CHECK_THROWS_AS(a += other, DataError);
}

TEST_CASE("metric undefined values and closed cases") {
    ConfusionMatrix conf(3);
    conf.add(1, 1, 6);
    conf.add(1, 2, 2);
    conf.add(2, 1, 1);
    // Class 0 never appears: every ratio involving it is undefined except the TN-inclusive accuracy.
    CHECK_FALSE(dice_coefficient(conf, 0).has_value());
    CHECK_FALSE(iou(conf, 0).has_value());
    CHECK_FALSE(class_recall(conf, 0).has_value());
    CHECK(pixel_accuracy(conf, 0) == 1.0);
    CHECK(dice_coefficient(conf, 1) == 12.0 / 15.0);
    CHECK(iou(conf, 1) == 6.0 / 9.0);
    CHECK(class_recall(conf, 1) == 6.0 / 8.0);
    CHECK(pixel_accuracy(conf, 2) == 6.0 / 9.0);
    CHECK(total_pa(conf) == 6.0 / 9.0);
    CHECK(mean_iou(conf) == doctest::Approx((6.0 / 9.0 + 0.0) / 2));
    CHECK(mean_pa(conf, {}, PixelAccuracyMode::tn_inclusive) == doctest::Approx((6.0 / 9.0 + 6.0 / 9.0) / 2));
    CHECK_FALSE(total_pa(ConfusionMatrix(3)).has_value());
    CHECK_FALSE(mean_iou(ConfusionMatrix(3)).has_value());
}

TEST_CASE("class relabeling permutes per-class metrics") {
    std::mt19937_64 g(7);
    const int k = 6;
    std::vector<int> perm{3, 5, 0, 1, 4, 2};
    for (int trial = 0; trial < 10; ++trial) {
        auto [pred, gt] = random_mask_pair(g, 16, 16, k);
        LabelMask pp = pred, gp = gt;
        for (auto& v : pp.labels) v = static_cast<std::uint8_t>(perm[v]);
        for (auto& v : gp.labels) v = static_cast<std::uint8_t>(perm[v]);
        ConfusionMatrix a(k), b(k);
        a.accumulate(pred, gt);
        b.accumulate(pp, gp);
        for (int c = 0; c < k; ++c) {
            CHECK(iou(a, c) == iou(b, perm[static_cast<std::size_t>(c)]));
            CHECK(dice_coefficient(a, c) == dice_coefficient(b, perm[static_cast<std::size_t>(c)]));
        }
        CHECK(total_pa(a) == total_pa(b));
        CHECK(mean_iou(a).value_or(-1) == doctest::Approx(mean_iou(b).value_or(-1)));
    }
}

TEST_CASE("report") {
    auto classes = ClassSet::baseprod();
    ConfusionMatrix conf(8);
    conf.add(0, 0, 100);
    conf.add(1, 1, 30);
    conf.add(1, 2, 10);
    conf.add(2, 2, 50);
    auto r = make_report(conf, classes);
    CHECK(r.per_class_pa.size() == 8);
    CHECK(r.total_pa == 180.0 / 190.0);
    CHECK(r.mean_pa == doctest::Approx((0.75 + 1.0) / 2));
    CHECK(r.evaluated_pixels == 190);
    auto no_void = make_report(conf, classes, ReportOptions{PixelAccuracyMode::recall, true});
    CHECK(no_void.total_pa == 80.0 / 90.0);

    const auto table = format_table(r);
    CHECK(table.find("Class Pixel Accuracy") != std::string::npos);
    CHECK(table.find("Average Metrics") != std::string::npos);
    CHECK(table.find("Mean IoU") != std::string::npos);
    CHECK(table.find("94.74") != std::string::npos);
    for (const auto& name : classes.names()) CHECK(table.find(name) != std::string::npos);

    auto j = report_to_json(r);
    CHECK(j["classes"].size() == 8);
    CHECK(j["per_class_pa"]["bedrock"].is_null());
    CHECK(j["per_class_pa"]["compact"].get<double>() == 0.75);
    CHECK(j["pixel_accuracy_mode"] == "recall");

    CHECK_THROWS_AS(make_report(ConfusionMatrix(3), classes), DataError);
}
