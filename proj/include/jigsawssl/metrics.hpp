#pragma once

#include <optional>
#include <string>
#include <vector>

namespace jigsawssl {

struct ConfusionCounts {
    long tp = 0, tn = 0, fp = 0, fn = 0;

    long total() const { return tp + tn + fp + fn; }
};

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

// Metric values live in [0,1]; ratios with a zero denominator are reported
// absent rather than zero.
struct EvaluationReport {
    std::optional<double> accuracy;
    std::optional<double> f1;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::optional<double> precision;
    std::vector<RocPoint> roc;
    std::optional<double> auroc;
};

// Positive class = neoplastic (label 1).
ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels);

EvaluationReport classification_metrics(const ConfusionCounts& counts);

// Threshold sweep over the distinct score values (predict positive when
// score >= threshold), anchored at (0,0) and (1,1). Higher score = more
// positive. Throws when only one class is present.
std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels);

// P(score_pos > score_neg) + 0.5 * P(tie), computed from average ranks.
// Agrees with the trapezoidal area under roc_curve to ~1e-12.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

double trapezoid_area(const std::vector<RocPoint>& curve);

// CSV rows `threshold,fpr,tpr`.
std::string roc_to_csv(const std::vector<RocPoint>& curve);

// Flat key:value text serialization; absent metrics are omitted.
std::string report_to_text(const EvaluationReport& report);

}  // namespace jigsawssl
