#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mimir/error.hpp"
#include "mimir/metrics.hpp"
#include "oracles.hpp"

using namespace mimir;

TEST_CASE("icc: identical ratings and the worked example") {
    const std::vector<double> x{1, 2, 3, 4}, y{2, 3, 4, 5};
    CHECK(icc_2_1(x, x).value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(icc_2_1(x, y).value == doctest::Approx(10.0 / 13.0).epsilon(1e-15));
    CHECK(icc_2_1(y, x).value == icc_2_1(x, y).value);
}

TEST_CASE("icc: unrelated ratings are near zero") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(20000), y;
    for (double& v : x) v = g(rng);
    y = x;
    std::shuffle(y.begin(), y.end(), rng);
    CHECK(std::abs(icc_2_1(x, y).value) < 0.03);
}

TEST_CASE("icc: degenerate and invalid input") {
    const std::vector<double> c(5, 2.0);
    const IccResult r = icc_2_1(c, c);
    CHECK(r.degenerate);
    CHECK(r.value == 0.0);
    CHECK_THROWS_AS(icc_2_1(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ValidationError);
    CHECK_THROWS_AS(icc_2_1(std::vector<double>{1, 2, NAN}, std::vector<double>{1, 2, 3}), ValidationError);
    CHECK_THROWS_AS(icc_2_1(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), ValidationError);
}

TEST_CASE("r squared: perfect, mean predictor, worse than mean") {
    const std::vector<double> y{1, 2, 3, 4};
    CHECK(r_squared(y, y) == 1.0);
    CHECK(r_squared(y, std::vector<double>(4, 2.5)) == 0.0);
    const std::vector<double> bad{4, 3, 2, 1};
    CHECK(r_squared(y, bad) == doctest::Approx(oracle::r_squared(y, bad)).epsilon(1e-15));
    CHECK(r_squared(y, bad) < 0.0);
    CHECK_THROWS_AS(r_squared(std::vector<double>(3, 1.0), y), ValidationError);
    CHECK_THROWS_AS(r_squared(std::vector<double>(3, 1.0), std::vector<double>(3, 1.0)), ValidationError);
}

TEST_CASE("mae and mape: worked values and zero truths") {
    const std::vector<double> y{1, 2, 3};
    const ErrorSummary same = mae_mape(y, y);
    CHECK(same.mae == 0.0);
    CHECK(same.mape == 0.0);
    CHECK(mae_mape(y, std::vector<double>{1.5, 2, 2}).mae == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mae_mape(std::vector<double>{1, 2, 4}, std::vector<double>{1.1, 1.8, 4.4}).mape == doctest::Approx(10.0).epsilon(1e-12));
    const ErrorSummary z = mae_mape(std::vector<double>{0, 2}, std::vector<double>{1, 3});
    CHECK(z.zero_truths == 1);
    CHECK(z.mae == 1.0);
    CHECK(z.mape == 50.0);
    CHECK_THROWS_AS(mae_mape(std::vector<double>{0, 0}, std::vector<double>{1, 1}), ValidationError);
    CHECK_THROWS_AS(mae_mape(std::vector<double>{}, std::vector<double>{}), ValidationError);
}

TEST_CASE("mae scales linearly") {
    const std::vector<double> y{1.5, -2.0, 7.0}, p{0.5, 1.0, 6.0};
    for (double c : {-3.0, 0.5, 4.0}) {
        std::vector<double> cy, cp;
        for (std::size_t i = 0; i < 3; ++i) {
            cy.push_back(c * y[i]);
            cp.push_back(c * p[i]);
        }
        CHECK(mae_mape(cy, cp).mae == doctest::Approx(std::abs(c) * mae_mape(y, p).mae).epsilon(1e-15));
    }
}

TEST_CASE("auc: worked values, ties and errors") {
    CHECK(auc_roc(std::vector<double>{0, 0, 1, 1}, std::vector<double>{0.1, 0.2, 0.8, 0.9}) == 1.0);
    CHECK(auc_roc(std::vector<double>{0, 0, 1, 1}, std::vector<double>{0.1, 0.4, 0.35, 0.8}) == 0.75);
    CHECK(auc_roc(std::vector<double>{0, 1, 0, 1}, std::vector<double>(4, 0.3)) == 0.5);
    CHECK_THROWS_AS(auc_roc(std::vector<double>{1, 1}, std::vector<double>{0.1, 0.2}), ValidationError);
    CHECK_THROWS_AS(auc_roc(std::vector<double>{0, 2}, std::vector<double>{0.1, 0.2}), ValidationError);
}

TEST_CASE("auc: reversal and monotone invariance on tie-free scores") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> labels, scores, neg, mono;
        for (int i = 0; i < 11; ++i) {
            labels.push_back(i < 4 ? 1.0 : 0.0);
            scores.push_back(u(rng));
        }
        for (double s : scores) {
            neg.push_back(-s);
            mono.push_back(std::exp(3.0 * s) + 7.0);
        }
        CHECK(auc_roc(labels, scores) + auc_roc(labels, neg) == 1.0);
        CHECK(auc_roc(labels, mono) == auc_roc(labels, scores));
    }
}

TEST_CASE("confusion: threshold edges and worked value") {
    const std::vector<double> labels{1, 1, 0, 0}, scores{0.9, 0.3, 0.4, 0.1};
    const Confusion low = confusion_at_threshold(labels, scores, -1.0);
    CHECK(low.sensitivity == 1.0);
    CHECK(low.specificity == 0.0);
    const Confusion high = confusion_at_threshold(labels, scores, 2.0);
    CHECK(high.sensitivity == 0.0);
    CHECK(high.specificity == 1.0);
    const Confusion mid = confusion_at_threshold(labels, scores, 0.5);
    CHECK(mid.sensitivity == 0.5);
    CHECK(mid.specificity == 1.0);
    CHECK(confusion_at_threshold(labels, scores, 0.9).sensitivity == 0.5);
    CHECK_THROWS_AS(confusion_at_threshold(std::vector<double>{0, 0}, scores, 0.5), ValidationError);
}

TEST_CASE("interpretation flags") {
    CHECK(icc_flag(0.95) == "excellent");
    CHECK(icc_flag(0.90) == "good");
    CHECK(icc_flag(0.80) == "good");
    CHECK(icc_flag(0.75) == "poor");
}

TEST_CASE("metrics agree with brute-force oracles on random small instances") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> size(3, 12);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::uniform_int_distribution<int> coarse(0, 4);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = size(rng);
        std::vector<double> y(n), p(n), labels(n), scores(n);
        for (int i = 0; i < n; ++i) {
            y[i] = u(rng);
            p[i] = y[i] + 0.7 * u(rng);
            labels[i] = i % 2;
            scores[i] = trial % 2 ? coarse(rng) * 0.25 : u(rng);  // odd trials carry ties
        }
        std::shuffle(labels.begin(), labels.end(), rng);
        worst = std::max(worst, oracle::rel_err(icc_2_1(y, p).value, oracle::icc_2_1(y, p)));
        worst = std::max(worst, oracle::rel_err(r_squared(y, p), oracle::r_squared(y, p)));
        const ErrorSummary e = mae_mape(y, p);
        worst = std::max(worst, oracle::rel_err(e.mae, oracle::mae(y, p)));
        worst = std::max(worst, oracle::rel_err(e.mape, oracle::mape(y, p)));
        worst = std::max(worst, oracle::rel_err(auc_roc(labels, scores), oracle::auc(labels, scores)));
        const Confusion c = confusion_at_threshold(labels, scores, 0.3);
        const auto [sens, spec] = oracle::confusion(labels, scores, 0.3);
        worst = std::max(worst, oracle::rel_err(c.sensitivity, sens));
        worst = std::max(worst, oracle::rel_err(c.specificity, spec));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("evaluate_target fills kind-specific fields and the report CSV") {
    const TargetSpec cont{"x", "mm", TargetKind::continuous, "g"};
    const TargetSpec bin{"b", "-", TargetKind::binary, "g"};
    const std::vector<double> y{1, 2, 3, 4}, lo{0, 0, 0, 5}, hi{9, 9, 9, 9};
    const TargetMetrics m = evaluate_target(cont, y, y, lo, hi);
    CHECK(m.icc == doctest::Approx(1.0));
    CHECK(m.mae == 0.0);
    CHECK(m.coverage == 0.75);
    CHECK(std::isnan(m.auc));
    CHECK(m.flag == "excellent");
    const std::vector<double> labels{0, 1, 0, 1}, scores{0.2, 0.7, 0.4, 0.6};
    const TargetMetrics b = evaluate_target(bin, labels, scores, {}, {});
    CHECK(b.auc == 1.0);
    CHECK(b.sensitivity == 1.0);
    CHECK(std::isnan(b.coverage));
    MetricsReport r{{m, b}};
    const std::string csv = r.to_csv();
    CHECK(csv.rfind("target,n,icc,r2,mae,mape,auc,coverage,sensitivity,specificity,icc_flag\n", 0) == 0);
    CHECK(r.find("b") != nullptr);
    CHECK(r.find("zz") == nullptr);
}
