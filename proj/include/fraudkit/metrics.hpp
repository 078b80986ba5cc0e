#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fraudkit/feature_matrix.hpp"

namespace fraudkit {

struct ConfusionMatrix {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double threshold = 0.0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    // Zero-denominator convention: 0 when undefined.
    double precision() const;
    double recall() const;
    double f1() const;
};

struct CurvePoint {
    double x = 0.0;  // fpr (roc) / recall (pr) / threshold (sweep)
    double y = 0.0;  // tpr (roc) / precision (pr) / precision (sweep)
    double threshold = 0.0;
    double extra = 0.0;  // sweep only: recall (f1 in `extra2`)
    double extra2 = 0.0;
};

enum class CurveKind { roc, pr, threshold_sweep };

struct CurveData {
    CurveKind kind = CurveKind::roc;
    std::vector<CurvePoint> points;
};

// Ranking quality as P(random positive outranks random negative), ties 1/2;
// computed via average ranks (Mann-Whitney). Both classes required.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Non-interpolated step-sum AP over descending distinct-score groups.
double average_precision(std::span<const double> scores, std::span<const int> labels);

// Positives among the k best-scored rows / k; ties broken by stable input
// (ascending node-id) order. Requires 1 <= k <= n.
double precision_at_k(std::span<const double> scores, std::span<const int> labels,
                      std::size_t k);

// Decision rule: score >= threshold predicts positive.
ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const int> labels,
                             double threshold);

CurveData threshold_sweep(std::span<const double> scores, std::span<const int> labels,
                          std::span<const double> grid);
std::vector<double> default_threshold_grid();  // 0.00..1.00 step 0.01

// Points at every distinct score (tie groups collapsed). ROC runs (0,0) to
// (1,1); the trapezoidal area under it reproduces roc_auc to ~1e-15.
CurveData roc_curve(std::span<const double> scores, std::span<const int> labels);
CurveData pr_curve(std::span<const double> scores, std::span<const int> labels);
double trapezoid_area(const CurveData& roc);

struct ThresholdObjective {
    enum class Kind { max_f1, min_recall, min_precision } kind = Kind::max_f1;
    double bound = 0.0;  // the r / p constraint for the min_* kinds

    std::string describe() const;
    static ThresholdObjective parse(const std::string& text);  // "max_f1", "min_recall=0.9", ...
};

// Scans the distinct validation scores as candidate thresholds and returns
// the optimizer of the objective; ties pick the highest threshold (fewest
// alerts). Infeasible constraints raise DataError naming the best achievable.
double select_threshold(std::span<const double> scores, std::span<const int> labels,
                        const ThresholdObjective& objective);

// Pearson r between each column and the 0/1 label; zero-variance columns are
// reported absent rather than 0.
std::map<std::string, std::optional<double>> feature_label_correlation(
    const FeatureMatrix& matrix, std::span<const int> labels);

}  // namespace fraudkit
