#include "jigsawssl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace jigsawssl {

ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) {
        throw std::invalid_argument("confusion: " + std::to_string(predictions.size()) +
                                    " predictions vs " + std::to_string(labels.size()) +
                                    " labels");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int p = predictions[i], y = labels[i];
        if ((p != 0 && p != 1) || (y != 0 && y != 1)) {
            throw std::invalid_argument("confusion: values must be binary");
        }
        if (y == 1) {
            p == 1 ? ++c.tp : ++c.fn;
        } else {
            p == 1 ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

namespace {

std::optional<double> ratio(long num, long den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EvaluationReport classification_metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw std::invalid_argument("classification_metrics: zero counts");
    EvaluationReport r;
    r.accuracy = ratio(c.tp + c.tn, c.total());
    r.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    r.sensitivity = ratio(c.tp, c.tp + c.fn);
    r.specificity = ratio(c.tn, c.tn + c.fp);
    r.precision = ratio(c.tp, c.tp + c.fp);
    return r;
}

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw std::invalid_argument("roc_curve: size mismatch");
    }
    long pos = 0, neg = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("roc_curve: labels must be binary");
        y == 1 ? ++pos : ++neg;
    }
    if (pos == 0 || neg == 0) {
        throw std::invalid_argument("roc_curve: both classes must be present");
    }

    // Sort samples by score descending; sweep thresholds at each distinct
    // score value.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    std::vector<RocPoint> curve;
    curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});

    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            labels[order[i]] == 1 ? ++tp : ++fp;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
        const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        curve.push_back({threshold, fpr, tpr});
    }
    // The final sweep point is always (1,1): at the minimum score everything
    // is predicted positive.
    return curve;
}

double trapezoid_area(const std::vector<RocPoint>& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) * 0.5;
    }
    return area;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("auroc: size mismatch");
    long pos = 0, neg = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("auroc: labels must be binary");
        y == 1 ? ++pos : ++neg;
    }
    if (pos == 0 || neg == 0) throw std::invalid_argument("auroc: both classes must be present");

    // Mann-Whitney U via average ranks; ties get half credit.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double u = rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::string roc_to_csv(const std::vector<RocPoint>& curve) {
    std::ostringstream out;
    out << "threshold,fpr,tpr\n";
    char buf[96];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", p.threshold, p.fpr, p.tpr);
        out << buf;
    }
    return out.str();
}

std::string report_to_text(const EvaluationReport& report) {
    std::ostringstream out;
    char buf[64];
    const auto emit = [&](const char* key, const std::optional<double>& v) {
        if (!v) return;
        std::snprintf(buf, sizeof(buf), "%s: %.6f\n", key, *v);
        out << buf;
    };
    emit("accuracy", report.accuracy);
    emit("f1", report.f1);
    emit("sensitivity", report.sensitivity);
    emit("specificity", report.specificity);
    emit("precision", report.precision);
    emit("auroc", report.auroc);
    return out.str();
}

}  // namespace jigsawssl
