#include <doctest.h>

#include <cmath>

#include "afford3d/metrics.hpp"
#include "helpers.hpp"

using namespace afford3d;
using testutil::Rng;

namespace {

// pairwise-rank oracle: fraction of correctly ordered (positive, negative)
// pairs, ties counting one half
double auc_pair_oracle(const std::vector<double>& pred, const std::vector<double>& gt) {
    double score = 0.0;
    long pairs = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!(gt[i] > 0.5)) continue;
        for (size_t j = 0; j < pred.size(); ++j) {
            if (gt[j] > 0.5) continue;
            ++pairs;
            if (pred[i] > pred[j])
                score += 1.0;
            else if (pred[i] == pred[j])
                score += 0.5;
        }
    }
    return 100.0 * score / static_cast<double>(pairs);
}

double aiou_loop_oracle(const std::vector<double>& pred, const std::vector<double>& gt) {
    double total = 0.0;
    for (int t = 1; t <= 99; ++t) {
        const double thr = t / 100.0;
        double tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < pred.size(); ++i) {
            const bool p = pred[i] >= thr;
            const bool g = gt[i] > 0.5;
            tp += (p && g) ? 1 : 0;
            fp += (p && !g) ? 1 : 0;
            fn += (!p && g) ? 1 : 0;
        }
        total += tp / (tp + fp + fn);
    }
    return 100.0 * total / 99.0;
}

double sim_loop_oracle(std::vector<double> p, std::vector<double> g) {
    double sp = 0, sg = 0;
    for (const double v : p) sp += v;
    for (const double v : g) sg += v;
    double acc = 0;
    for (size_t i = 0; i < p.size(); ++i) acc += std::min(p[i] / sp, g[i] / sg);
    return acc;
}

}  // namespace

TEST_CASE("auc on the documented cases") {
    CHECK(*metrics::auc({0, 1, 0, 1}, {0, 1, 0, 1}) == doctest::Approx(100.0));
    CHECK(*metrics::auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(75.0));
    CHECK(*metrics::auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(50.0));
    CHECK_FALSE(metrics::auc({0.2, 0.4}, {1, 1}).has_value());
    CHECK_FALSE(metrics::auc({0.2, 0.4}, {0, 0}).has_value());
}

TEST_CASE("auc equals the pairwise-rank oracle on random instances") {
    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 4 + static_cast<int>(rng.uniform_int(29));
        std::vector<double> pred(n), gt(n);
        bool pos = false, neg = false;
        for (int i = 0; i < n; ++i) {
            // quantized so ties actually occur
            pred[i] = std::floor(rng.uniform() * 8.0) / 8.0;
            gt[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
            (gt[i] > 0.5 ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        CHECK(std::fabs(*metrics::auc(pred, gt) - auc_pair_oracle(pred, gt)) < 1e-9);
    }
}

TEST_CASE("aiou on the documented cases and the loop oracle") {
    CHECK(*metrics::aiou({1, 1, 0, 0}, {1, 1, 0, 0}) == doctest::Approx(100.0));
    CHECK(*metrics::aiou({1, 1, 0, 0}, {1, 0, 1, 0}) == doctest::Approx(100.0 / 3.0));
    CHECK(*metrics::aiou({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(0.0));
    CHECK_FALSE(metrics::aiou({0.3, 0.6}, {0.0, 0.2}).has_value());

    Rng rng(102);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 4 + static_cast<int>(rng.uniform_int(61));
        std::vector<double> pred(n), gt(n);
        bool fg = false;
        for (int i = 0; i < n; ++i) {
            pred[i] = rng.uniform();
            gt[i] = rng.uniform();
            fg = fg || gt[i] > 0.5;
        }
        if (!fg) continue;
        CHECK(std::fabs(*metrics::aiou(pred, gt) - aiou_loop_oracle(pred, gt)) < 1e-9);
    }
}

TEST_CASE("aiou ignores monotone transforms that stay between grid thresholds") {
    const std::vector<double> gt = {1, 1, 0, 0, 1};
    const std::vector<double> a = {0.20, 0.60, 0.10, 0.90, 0.45};
    const std::vector<double> b = {0.205, 0.603, 0.104, 0.909, 0.459};  // same buckets
    CHECK(*metrics::aiou(a, gt) == *metrics::aiou(b, gt));
}

TEST_CASE("sim on the documented cases, symmetry, oracle") {
    CHECK(metrics::sim({0.3, 0.7}, {0.3, 0.7}) == doctest::Approx(1.0));
    CHECK(metrics::sim({1, 0, 1, 0}, {0, 1, 0, 1}) == doctest::Approx(0.0));
    CHECK(metrics::sim({0.75, 0.25}, {0.5, 0.5}) == doctest::Approx(0.75));
    CHECK_THROWS(metrics::sim({0, 0}, {1, 0}));
    CHECK_THROWS(metrics::sim({-0.1, 0.5}, {1, 0}));

    Rng rng(103);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> p(32), q(32);
        for (int i = 0; i < 32; ++i) {
            p[i] = rng.uniform();
            q[i] = rng.uniform();
        }
        CHECK(metrics::sim(p, q) == doctest::Approx(metrics::sim(q, p)).epsilon(1e-12));
        CHECK(metrics::sim(p, q) == doctest::Approx(sim_loop_oracle(p, q)).epsilon(1e-12));
    }
}

TEST_CASE("mae cases, oracle, triangle inequality") {
    CHECK(metrics::mae({0.4, 0.6}, {0.4, 0.6}) == doctest::Approx(0.0));
    CHECK(metrics::mae({0.2, 0.8}, {0.0, 1.0}) == doctest::Approx(0.2));

    Rng rng(104);
    std::vector<double> p(100), q(100), r(100);
    for (int i = 0; i < 100; ++i) {
        p[i] = rng.uniform();
        q[i] = rng.uniform();
        r[i] = rng.uniform();
    }
    double brute = 0;
    for (int i = 0; i < 100; ++i) brute += std::fabs(p[i] - q[i]);
    CHECK(metrics::mae(p, q) == doctest::Approx(brute / 100.0).epsilon(1e-12));
    for (int trial = 0; trial < 20; ++trial)
        CHECK(metrics::mae(p, r) <= metrics::mae(p, q) + metrics::mae(q, r) + 1e-12);
}

TEST_CASE("acc cases") {
    CHECK(metrics::acc({1, 2, 3}, {1, 2, 3}) == doctest::Approx(100.0));
    CHECK(metrics::acc({1, 2, 3}, {2, 3, 1}) == doctest::Approx(0.0));
    CHECK(metrics::acc({1, 2, 3, 4}, {1, 2, 3, 0}) == doctest::Approx(75.0));
    CHECK_THROWS(metrics::acc({}, {}));
}

TEST_CASE("accumulator averages over non-skipped samples") {
    metrics::MetricAccumulator acc;
    acc.add({0.9, 0.1, 0.8, 0.2}, {1, 0, 1, 0}, 3, 3);   // perfect
    acc.add({0.4, 0.4, 0.4, 0.4}, {0, 0, 0, 0}, 1, 2);   // degenerate gt -> skipped
    const auto report = acc.report();
    CHECK(report.n_samples == 2);
    CHECK(report.skipped_auc == 1);
    CHECK(report.skipped_aiou == 1);
    CHECK(report.skipped_sim == 1);
    CHECK(report.auc == doctest::Approx(100.0));
    CHECK(report.acc == doctest::Approx(50.0));
    CHECK(report.to_text().find("aiou_sample_avg=") != std::string::npos);
    CHECK(report.to_text().find("aiou_threshold_avg=") != std::string::npos);
}
