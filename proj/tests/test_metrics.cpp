#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "errors.hpp"
#include "metrics.hpp"
#include "rng.hpp"

using namespace lexchain;

namespace {

// Brute-force counting oracle, independent of the library implementation:
// walks the full defendant x label grid with plain membership scans.
struct OracleOut {
    double accuracy, mp, mr, mf1;
};

bool contains(const std::vector<int> &v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

OracleOut oracle_set_metrics(const std::vector<std::vector<int>> &preds,
                             const std::vector<std::vector<int>> &golds) {
    std::set<int> gold_labels;
    for (const auto &g : golds) gold_labels.insert(g.begin(), g.end());
    long exact = 0;
    for (size_t i = 0; i < golds.size(); ++i) {
        std::set<int> p(preds[i].begin(), preds[i].end());
        std::set<int> g(golds[i].begin(), golds[i].end());
        if (p == g) ++exact;
    }
    double sum_p = 0, sum_r = 0, sum_f1 = 0;
    for (int label : gold_labels) {
        long tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < golds.size(); ++i) {
            bool in_pred = contains(preds[i], label);
            bool in_gold = contains(golds[i], label);
            if (in_pred && in_gold) ++tp;
            if (in_pred && !in_gold) ++fp;
            if (!in_pred && in_gold) ++fn;
        }
        double p = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
        double r = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
        double f1 = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
        sum_p += p * 100.0;
        sum_r += r * 100.0;
        sum_f1 += f1 * 100.0;
    }
    double n_labels = double(gold_labels.size());
    OracleOut out;
    out.accuracy = golds.empty() ? 0.0 : 100.0 * double(exact) / double(golds.size());
    out.mp = n_labels > 0 ? sum_p / n_labels : 0.0;
    out.mr = n_labels > 0 ? sum_r / n_labels : 0.0;
    out.mf1 = n_labels > 0 ? sum_f1 / n_labels : 0.0;
    return out;
}

OracleOut oracle_class_metrics(const std::vector<std::optional<int>> &preds,
                               const std::vector<int> &golds) {
    std::vector<std::vector<int>> set_preds, set_golds;
    for (size_t i = 0; i < golds.size(); ++i) {
        set_preds.push_back(preds[i] ? std::vector<int>{*preds[i]} : std::vector<int>{});
        set_golds.push_back({golds[i]});
    }
    return oracle_set_metrics(set_preds, set_golds);
}

} // namespace

TEST_CASE("perfect predictions score 100 everywhere") {
    std::vector<std::vector<int>> golds = {{0, 2}, {1}, {0}};
    TaskMetrics m = compute_set_metrics(golds, golds);
    CHECK(m.accuracy == 100.0);
    CHECK(m.macro_precision == 100.0);
    CHECK(m.macro_recall == 100.0);
    CHECK(m.macro_f1 == 100.0);
}

TEST_CASE("the worked two-defendant penalty example") {
    // gold (P1, P2), predicted (P1, P1)
    std::vector<std::optional<int>> preds = {1, 1};
    std::vector<int> golds = {1, 2};
    TaskMetrics m = compute_class_metrics(preds, golds);
    CHECK(m.accuracy == 50.0);
    CHECK(m.macro_precision == 25.0);
    CHECK(m.macro_recall == 50.0);
    CHECK(m.macro_f1 == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
    CHECK(m.labels.at(1).precision == 50.0);
    CHECK(m.labels.at(1).recall == 100.0);
    CHECK(m.labels.at(2).f1 == 0.0);
}

TEST_CASE("set metrics equal the brute-force oracle exactly on 1000 random sets") {
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t n = 1 + rng.below(6);
        std::vector<std::vector<int>> preds(n), golds(n);
        for (size_t i = 0; i < n; ++i) {
            size_t np = rng.below(4);
            size_t ng = 1 + rng.below(3);
            std::set<int> p, g;
            for (size_t k = 0; k < np; ++k) p.insert(static_cast<int>(rng.below(6)));
            for (size_t k = 0; k < ng; ++k) g.insert(static_cast<int>(rng.below(6)));
            preds[i].assign(p.begin(), p.end());
            golds[i].assign(g.begin(), g.end());
        }
        TaskMetrics m = compute_set_metrics(preds, golds);
        OracleOut o = oracle_set_metrics(preds, golds);
        CHECK(m.accuracy == o.accuracy);
        CHECK(m.macro_precision == o.mp);
        CHECK(m.macro_recall == o.mr);
        CHECK(m.macro_f1 == o.mf1);
    }
}

TEST_CASE("class metrics equal the brute-force oracle exactly on 1000 random sets") {
    Rng rng(78);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t n = 1 + rng.below(8);
        std::vector<std::optional<int>> preds(n);
        std::vector<int> golds(n);
        for (size_t i = 0; i < n; ++i) {
            golds[i] = static_cast<int>(rng.below(11));
            if (rng.below(10) == 0)
                preds[i] = std::nullopt; // malformed decode
            else
                preds[i] = static_cast<int>(rng.below(11));
        }
        TaskMetrics m = compute_class_metrics(preds, golds);
        OracleOut o = oracle_class_metrics(preds, golds);
        CHECK(m.accuracy == o.accuracy);
        CHECK(m.macro_precision == o.mp);
        CHECK(m.macro_recall == o.mr);
        CHECK(m.macro_f1 == o.mf1);
    }
}

TEST_CASE("macro-F1 is invariant under label id permutation") {
    Rng rng(79);
    std::vector<std::vector<int>> preds, golds;
    for (int i = 0; i < 40; ++i) {
        std::set<int> p, g;
        for (size_t k = 0; k < rng.below(3); ++k) p.insert(static_cast<int>(rng.below(8)));
        for (size_t k = 0; k < 1 + rng.below(3); ++k)
            g.insert(static_cast<int>(rng.below(8)));
        preds.emplace_back(p.begin(), p.end());
        golds.emplace_back(g.begin(), g.end());
    }
    std::vector<int> perm = {5, 3, 7, 1, 0, 6, 2, 4};
    auto apply = [&perm](const std::vector<std::vector<int>> &sets) {
        std::vector<std::vector<int>> out;
        for (const auto &s : sets) {
            std::vector<int> mapped;
            for (int id : s) mapped.push_back(perm[static_cast<size_t>(id)]);
            std::sort(mapped.begin(), mapped.end());
            out.push_back(std::move(mapped));
        }
        return out;
    };
    TaskMetrics base = compute_set_metrics(preds, golds);
    TaskMetrics permuted = compute_set_metrics(apply(preds), apply(golds));
    CHECK(base.macro_f1 == doctest::Approx(permuted.macro_f1).epsilon(1e-12));
    CHECK(base.accuracy == permuted.accuracy);
}

TEST_CASE("exact-set-match accuracy never exceeds per-label micro accuracy") {
    Rng rng(80);
    const int inventory = 6;
    for (int trial = 0; trial < 200; ++trial) {
        size_t n = 1 + rng.below(8);
        std::vector<std::vector<int>> preds(n), golds(n);
        for (size_t i = 0; i < n; ++i) {
            std::set<int> p, g;
            for (size_t k = 0; k < rng.below(4); ++k)
                p.insert(static_cast<int>(rng.below(inventory)));
            for (size_t k = 0; k < 1 + rng.below(3); ++k)
                g.insert(static_cast<int>(rng.below(inventory)));
            preds[i].assign(p.begin(), p.end());
            golds[i].assign(g.begin(), g.end());
        }
        TaskMetrics m = compute_set_metrics(preds, golds);
        long correct_indicators = 0;
        for (size_t i = 0; i < n; ++i)
            for (int label = 0; label < inventory; ++label)
                if (contains(preds[i], label) == contains(golds[i], label))
                    ++correct_indicators;
        double micro = 100.0 * double(correct_indicators) / double(n * inventory);
        CHECK(m.accuracy <= micro + 1e-9);
    }
}

TEST_CASE("metric reports survive the JSON round trip") {
    std::vector<std::vector<int>> golds = {{0, 2}, {1}};
    std::vector<std::vector<int>> preds = {{0}, {1}};
    MetricReport report;
    report.tasks["articles"] = compute_set_metrics(preds, golds);
    report.tasks["charges"] = compute_set_metrics(golds, golds);
    report.tasks["penalty"] = compute_class_metrics({{0}, {1}}, {0, 1});
    std::string path = "metrics_roundtrip.json";
    {
        std::ofstream out(path, std::ios::binary);
        out << report.to_json();
    }
    MetricReport loaded = MetricReport::from_json_file(path);
    CHECK(loaded.mean_judgment_f1() ==
          doctest::Approx(report.mean_judgment_f1()).epsilon(1e-12));
    CHECK(loaded.tasks.at("articles").macro_f1 ==
          doctest::Approx(report.tasks.at("articles").macro_f1).epsilon(1e-12));
    std::remove(path.c_str());
}

TEST_CASE("misaligned predictions are a hard error") {
    CHECK_THROWS_AS(compute_set_metrics({{0}}, {{0}, {1}}), DataError);
    CHECK_THROWS_AS(compute_class_metrics({{0}}, {0, 1}), DataError);
}
