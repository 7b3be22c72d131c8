#include <doctest.h>

#include <cmath>

#include "jigsawssl/metrics.hpp"
#include "jigsawssl/rng.hpp"

using namespace jigsawssl;

namespace {

// Brute-force tally, independent of the library path.
ConfusionCounts confusion_oracle(const std::vector<int>& preds, const std::vector<int>& labels) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1 && preds[i] == 1) ++c.tp;
        if (labels[i] == 1 && preds[i] == 0) ++c.fn;
        if (labels[i] == 0 && preds[i] == 1) ++c.fp;
        if (labels[i] == 0 && preds[i] == 0) ++c.tn;
    }
    return c;
}

// O(n^2) pairwise rank statistic with half credit for ties.
double auroc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

// Independent threshold enumeration for the ROC points.
std::vector<RocPoint> roc_oracle(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
    std::vector<double> thresholds = scores;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    long pos = 0, neg = 0;
    for (int y : labels) y == 1 ? ++pos : ++neg;

    std::vector<RocPoint> pts;
    pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    for (double t : thresholds) {
        long tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) labels[i] == 1 ? ++tp : ++fp;
        }
        pts.push_back({t, static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
    }
    return pts;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("confusion basics") {
    CHECK_THROWS(confusion({1, 0}, {1}));
    CHECK_THROWS(confusion({2, 0}, {1, 0}));

    const auto c = confusion({1, 1, 0, 0}, {1, 1, 0, 0});
    CHECK(c.tp == 2);
    CHECK(c.tn == 2);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);

    const auto all_fp = confusion({1, 1, 1, 1}, {0, 0, 0, 0});
    CHECK(all_fp.fp == 4);
    CHECK(all_fp.total() == 4);
}

TEST_CASE("confusion matches the tally oracle on random vectors") {
    Rng rng(12);
    std::vector<int> preds(200), labels(200);
    for (int trial = 0; trial < 20; ++trial) {
        for (std::size_t i = 0; i < preds.size(); ++i) {
            preds[i] = static_cast<int>(rng.uniform_int(0, 1));
            labels[i] = static_cast<int>(rng.uniform_int(0, 1));
        }
        const auto a = confusion(preds, labels);
        const auto b = confusion_oracle(preds, labels);
        CHECK(a.tp == b.tp);
        CHECK(a.tn == b.tn);
        CHECK(a.fp == b.fp);
        CHECK(a.fn == b.fn);
    }
}

TEST_CASE("classification metrics formulas") {
    ConfusionCounts c{8, 2, 1, 1};
    const auto r = classification_metrics(c);
    CHECK(*r.accuracy == doctest::Approx(10.0 / 12.0).epsilon(1e-12));
    CHECK(*r.f1 == doctest::Approx(16.0 / 18.0).epsilon(1e-12));
    CHECK(*r.sensitivity == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
    CHECK(*r.specificity == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(*r.precision == doctest::Approx(8.0 / 9.0).epsilon(1e-12));

    // F1 equals the harmonic mean of precision and sensitivity when defined.
    const double harmonic =
        2.0 * *r.precision * *r.sensitivity / (*r.precision + *r.sensitivity);
    CHECK(*r.f1 == doctest::Approx(harmonic).epsilon(1e-12));

    // sensitivity * (TP+FN) == TP exactly on integer inputs.
    CHECK(*r.sensitivity * 9.0 == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("perfect classifier and undefined ratios") {
    const auto perfect = classification_metrics({5, 5, 0, 0});
    CHECK(*perfect.accuracy == 1.0);
    CHECK(*perfect.f1 == 1.0);

    // No positives at all: sensitivity/precision/f1 undefined, not zero.
    const auto no_pos = classification_metrics({0, 7, 0, 0});
    CHECK(no_pos.accuracy.has_value());
    CHECK_FALSE(no_pos.sensitivity.has_value());
    CHECK_FALSE(no_pos.precision.has_value());
    CHECK_FALSE(no_pos.f1.has_value());

    CHECK_THROWS(classification_metrics({0, 0, 0, 0}));
}

TEST_CASE("roc curve: separated, tied, and random-vs-oracle") {
    // Perfect separation: the curve passes through (0,1).
    const std::vector<double> sep_scores{0.9, 0.8, 0.2, 0.1};
    const std::vector<int> sep_labels{1, 1, 0, 0};
    const auto sep = roc_curve(sep_scores, sep_labels);
    bool through_01 = false;
    for (const auto& p : sep) through_01 |= (p.fpr == 0.0 && p.tpr == 1.0);
    CHECK(through_01);

    // All scores equal: only the two anchor points.
    const auto flat = roc_curve({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
    REQUIRE(flat.size() == 2);
    CHECK(flat.front().fpr == 0.0);
    CHECK(flat.front().tpr == 0.0);
    CHECK(flat.back().fpr == 1.0);
    CHECK(flat.back().tpr == 1.0);

    CHECK_THROWS(roc_curve({0.5, 0.6}, {1, 1}));

    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores(50);
        std::vector<int> labels(50);
        labels[0] = 0;
        labels[1] = 1;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            scores[i] = std::round(rng.uniform() * 20) / 20.0;  // force ties
            if (i >= 2) labels[i] = static_cast<int>(rng.uniform_int(0, 1));
        }
        const auto mine = roc_curve(scores, labels);
        const auto oracle = roc_oracle(scores, labels);
        REQUIRE(mine.size() == oracle.size());
        for (std::size_t i = 0; i < mine.size(); ++i) {
            CHECK(mine[i].fpr == doctest::Approx(oracle[i].fpr).epsilon(1e-12));
            CHECK(mine[i].tpr == doctest::Approx(oracle[i].tpr).epsilon(1e-12));
        }
        // Monotone in FPR, anchored.
        for (std::size_t i = 1; i < mine.size(); ++i) CHECK(mine[i].fpr >= mine[i - 1].fpr);
        CHECK(mine.back().fpr == 1.0);
        CHECK(mine.back().tpr == 1.0);
    }
}

TEST_CASE("auroc: trivial cases and the tie convention") {
    CHECK(auroc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(auroc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5));
    CHECK_THROWS(auroc({0.5}, {1}));
}

TEST_CASE("auroc equals the pairwise oracle and the trapezoid area") {
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(10, 200));
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        labels[0] = 0;
        labels[1] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = std::round(rng.uniform() * 50) / 50.0;
            if (i >= 2) labels[i] = static_cast<int>(rng.uniform_int(0, 1));
        }
        const double mine = auroc(scores, labels);
        CHECK(mine == doctest::Approx(auroc_oracle(scores, labels)).epsilon(1e-11));
        CHECK(mine ==
              doctest::Approx(trapezoid_area(roc_curve(scores, labels))).epsilon(1e-11));
    }
}

TEST_CASE("auroc symmetry and monotone-transform invariance") {
    Rng rng(77);
    std::vector<double> scores(80);
    std::vector<int> labels(80);
    labels[0] = 0;
    labels[1] = 1;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.uniform();  // ties have probability zero
        if (i >= 2) labels[i] = static_cast<int>(rng.uniform_int(0, 1));
    }
    std::vector<double> negated = scores, exped = scores;
    for (auto& s : negated) s = -s;
    for (auto& s : exped) s = std::exp(s);
    CHECK(auroc(scores, labels) + auroc(negated, labels) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(auroc(scores, labels) == doctest::Approx(auroc(exped, labels)).epsilon(1e-12));
}

TEST_CASE("serialization formats") {
    const auto curve = roc_curve({0.9, 0.1}, {1, 0});
    const auto csv = roc_to_csv(curve);
    CHECK(csv.find("threshold,fpr,tpr\n") == 0);

    EvaluationReport r;
    r.accuracy = 0.7391;
    r.f1 = 0.82;
    const auto text = report_to_text(r);
    CHECK(text.find("accuracy: 0.739100") != std::string::npos);
    CHECK(text.find("f1: 0.820000") != std::string::npos);
    CHECK(text.find("sensitivity") == std::string::npos);  // absent stays absent
}

}  // TEST_SUITE
