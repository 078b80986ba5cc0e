#include "fraudkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fraudkit/errors.hpp"
#include "fraudkit/vecops.hpp"

namespace fraudkit {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels,
                  const char* op) {
    if (scores.size() != labels.size())
        throw ContractError(std::string(op) + ": scores/labels size mismatch");
    if (scores.empty()) throw DataError(std::string(op) + ": empty input");
    for (double s : scores)
        if (!std::isfinite(s)) throw DataError(std::string(op) + ": non-finite score");
    for (int y : labels)
        if (y != 0 && y != 1)
            throw DataError(std::string(op) + ": labels must be 0 or 1");
}

std::pair<std::uint64_t, std::uint64_t> class_counts(std::span<const int> labels) {
    std::uint64_t pos = 0;
    for (int y : labels) pos += static_cast<std::uint64_t>(y);
    return {pos, labels.size() - pos};
}

// Indices ordered by descending score; equal scores keep ascending input
// order (the documented stable tie rule).
std::vector<std::size_t> descending_order(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

// Walks descending tie groups, calling visit(threshold, tp_in_group,
// group_size) with cumulative handling left to the caller.
template <typename Visit>
void for_each_group(std::span<const double> scores, std::span<const int> labels,
                    const std::vector<std::size_t>& order, Visit&& visit) {
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::uint64_t tp = 0;
        const double s = scores[order[i]];
        while (j < order.size() && scores[order[j]] == s) {
            tp += static_cast<std::uint64_t>(labels[order[j]]);
            ++j;
        }
        visit(s, tp, static_cast<std::uint64_t>(j - i));
        i = j;
    }
}

}  // namespace

double ConfusionMatrix::precision() const {
    std::uint64_t denom = tp + fp;
    return denom == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(denom);
}

double ConfusionMatrix::recall() const {
    std::uint64_t denom = tp + fn;
    return denom == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(denom);
}

double ConfusionMatrix::f1() const {
    double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels, "roc_auc");
    auto [pos, neg] = class_counts(labels);
    if (pos == 0 || neg == 0)
        throw DataError("roc_auc: both classes must be present (got " + std::to_string(pos) +
                        " positives, " + std::to_string(neg) + " negatives)");

    // Mann-Whitney with average ranks over tie groups, ranks ascending in score.
    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return a < b;
    });

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        std::uint64_t group_pos = 0;
        const double s = scores[idx[i]];
        while (j < idx.size() && scores[idx[j]] == s) {
            group_pos += static_cast<std::uint64_t>(labels[idx[j]]);
            ++j;
        }
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        pos_rank_sum += avg_rank * static_cast<double>(group_pos);
        i = j;
    }
    double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels, "average_precision");
    auto [pos, neg] = class_counts(labels);
    (void)neg;
    if (pos == 0) throw DataError("average_precision: no positive labels");

    auto order = descending_order(scores);
    double ap = 0.0;
    std::uint64_t cum_tp = 0, cum_n = 0;
    for_each_group(scores, labels, order,
                   [&](double, std::uint64_t tp, std::uint64_t size) {
                       cum_tp += tp;
                       cum_n += size;
                       if (tp == 0) return;  // recall unchanged
                       double recall_step = static_cast<double>(tp) / static_cast<double>(pos);
                       double precision = static_cast<double>(cum_tp) / static_cast<double>(cum_n);
                       ap += recall_step * precision;
                   });
    return ap;
}

double precision_at_k(std::span<const double> scores, std::span<const int> labels,
                      std::size_t k) {
    check_inputs(scores, labels, "precision_at_k");
    if (k < 1 || k > scores.size())
        throw ContractError("precision_at_k: k=" + std::to_string(k) +
                            " outside [1, " + std::to_string(scores.size()) + "]");
    auto order = descending_order(scores);
    std::uint64_t tp = 0;
    for (std::size_t i = 0; i < k; ++i) tp += static_cast<std::uint64_t>(labels[order[i]]);
    return static_cast<double>(tp) / static_cast<double>(k);
}

ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const int> labels,
                             double threshold) {
    check_inputs(scores, labels, "confusion_at");
    ConfusionMatrix cm;
    cm.threshold = threshold;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool predicted = scores[i] >= threshold;
        if (predicted && labels[i] == 1) cm.tp++;
        else if (predicted) cm.fp++;
        else if (labels[i] == 1) cm.fn++;
        else cm.tn++;
    }
    return cm;
}

std::vector<double> default_threshold_grid() {
    std::vector<double> grid(101);
    for (int i = 0; i <= 100; ++i) grid[i] = static_cast<double>(i) / 100.0;
    return grid;
}

CurveData threshold_sweep(std::span<const double> scores, std::span<const int> labels,
                          std::span<const double> grid) {
    check_inputs(scores, labels, "threshold_sweep");
    if (grid.empty()) throw ContractError("threshold_sweep: empty grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < 0.0 || grid[i] > 1.0)
            throw ContractError("threshold_sweep: grid value outside [0,1]");
        if (i > 0 && grid[i] <= grid[i - 1])
            throw ContractError("threshold_sweep: grid must be strictly ascending");
    }

    CurveData curve;
    curve.kind = CurveKind::threshold_sweep;
    curve.points.reserve(grid.size());
    for (double thr : grid) {
        ConfusionMatrix cm = confusion_at(scores, labels, thr);
        CurvePoint pt;
        pt.x = thr;
        pt.threshold = thr;
        pt.y = cm.precision();
        pt.extra = cm.recall();
        pt.extra2 = cm.f1();
        curve.points.push_back(pt);
    }
    return curve;
}

CurveData roc_curve(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels, "roc_curve");
    auto [pos, neg] = class_counts(labels);
    if (pos == 0 || neg == 0) throw DataError("roc_curve: both classes must be present");

    CurveData curve;
    curve.kind = CurveKind::roc;
    auto order = descending_order(scores);
    CurvePoint start;
    start.x = 0.0;
    start.y = 0.0;
    start.threshold = std::numeric_limits<double>::infinity();
    curve.points.push_back(start);

    std::uint64_t cum_tp = 0, cum_fp = 0;
    for_each_group(scores, labels, order,
                   [&](double s, std::uint64_t tp, std::uint64_t size) {
                       cum_tp += tp;
                       cum_fp += size - tp;
                       CurvePoint pt;
                       pt.x = static_cast<double>(cum_fp) / static_cast<double>(neg);
                       pt.y = static_cast<double>(cum_tp) / static_cast<double>(pos);
                       pt.threshold = s;
                       curve.points.push_back(pt);
                   });
    return curve;
}

CurveData pr_curve(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels, "pr_curve");
    auto [pos, neg] = class_counts(labels);
    (void)neg;
    if (pos == 0) throw DataError("pr_curve: no positive labels");

    CurveData curve;
    curve.kind = CurveKind::pr;
    auto order = descending_order(scores);
    std::uint64_t cum_tp = 0, cum_n = 0;
    for_each_group(scores, labels, order,
                   [&](double s, std::uint64_t tp, std::uint64_t size) {
                       cum_tp += tp;
                       cum_n += size;
                       CurvePoint pt;
                       pt.x = static_cast<double>(cum_tp) / static_cast<double>(pos);
                       pt.y = static_cast<double>(cum_tp) / static_cast<double>(cum_n);
                       pt.threshold = s;
                       curve.points.push_back(pt);
                   });
    return curve;
}

double trapezoid_area(const CurveData& roc) {
    if (roc.kind != CurveKind::roc)
        throw ContractError("trapezoid_area expects a roc curve");
    double area = 0.0;
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        const CurvePoint& a = roc.points[i - 1];
        const CurvePoint& b = roc.points[i];
        area += (b.x - a.x) * (a.y + b.y) / 2.0;
    }
    return area;
}

namespace {

// Compact bound rendering for objective keys ("0.9", not "0.900000").
std::string compact_bound(double bound) {
    std::string s = std::to_string(bound);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

}  // namespace

std::string ThresholdObjective::describe() const {
    switch (kind) {
        case Kind::max_f1: return "max_f1";
        case Kind::min_recall: return "min_recall=" + compact_bound(bound);
        case Kind::min_precision: return "min_precision=" + compact_bound(bound);
    }
    return "?";
}

ThresholdObjective ThresholdObjective::parse(const std::string& text) {
    ThresholdObjective obj;
    if (text == "max_f1") {
        obj.kind = Kind::max_f1;
        return obj;
    }
    auto parse_bound = [&](std::string_view prefix) -> std::optional<double> {
        if (text.size() <= prefix.size() || text.compare(0, prefix.size(), prefix) != 0)
            return std::nullopt;
        if (text[prefix.size()] != '=') return std::nullopt;
        try {
            return std::stod(text.substr(prefix.size() + 1));
        } catch (...) {
            throw ContractError("bad threshold objective bound in \"" + text + "\"");
        }
    };
    if (auto b = parse_bound("min_recall")) {
        obj.kind = Kind::min_recall;
        obj.bound = *b;
    } else if (auto b = parse_bound("min_precision")) {
        obj.kind = Kind::min_precision;
        obj.bound = *b;
    } else {
        throw ContractError("unknown threshold objective \"" + text +
                            "\" (want max_f1, min_recall=R, or min_precision=P)");
    }
    if (obj.bound < 0.0 || obj.bound > 1.0)
        throw ContractError("threshold objective bound must lie in [0,1]");
    return obj;
}

double select_threshold(std::span<const double> scores, std::span<const int> labels,
                        const ThresholdObjective& objective) {
    check_inputs(scores, labels, "select_threshold");
    auto [pos, neg] = class_counts(labels);
    (void)neg;
    if (pos == 0) throw DataError("select_threshold: no positive labels");

    // Candidates are the distinct scores, visited descending, with cumulative
    // tp/fp so each candidate describes "predict positive iff score >= s".
    auto order = descending_order(scores);
    struct Candidate {
        double threshold, precision, recall, f1;
    };
    std::vector<Candidate> candidates;
    std::uint64_t cum_tp = 0, cum_n = 0;
    for_each_group(scores, labels, order,
                   [&](double s, std::uint64_t tp, std::uint64_t size) {
                       cum_tp += tp;
                       cum_n += size;
                       Candidate c;
                       c.threshold = s;
                       c.precision = static_cast<double>(cum_tp) / static_cast<double>(cum_n);
                       c.recall = static_cast<double>(cum_tp) / static_cast<double>(pos);
                       c.f1 = c.precision + c.recall == 0.0
                                  ? 0.0
                                  : 2.0 * c.precision * c.recall / (c.precision + c.recall);
                       candidates.push_back(c);
                   });

    switch (objective.kind) {
        case ThresholdObjective::Kind::max_f1: {
            // Descending scan: strict improvement keeps the tie at the
            // highest threshold.
            const Candidate* best = &candidates.front();
            for (const Candidate& c : candidates)
                if (c.f1 > best->f1) best = &c;
            return best->threshold;
        }
        case ThresholdObjective::Kind::min_recall: {
            for (const Candidate& c : candidates)
                if (c.recall >= objective.bound) return c.threshold;
            throw DataError("select_threshold: min_recall=" + std::to_string(objective.bound) +
                            " infeasible; best achievable recall is " +
                            std::to_string(candidates.back().recall));
        }
        case ThresholdObjective::Kind::min_precision: {
            const Candidate* best = nullptr;
            double best_precision_seen = 0.0;
            for (const Candidate& c : candidates) {
                best_precision_seen = std::max(best_precision_seen, c.precision);
                if (c.precision < objective.bound) continue;
                // Maximize recall subject to the precision floor; equal
                // recall resolves to the higher threshold (seen first).
                if (!best || c.recall > best->recall) best = &c;
            }
            if (!best)
                throw DataError("select_threshold: min_precision=" +
                                std::to_string(objective.bound) +
                                " infeasible; best achievable precision is " +
                                std::to_string(best_precision_seen));
            return best->threshold;
        }
    }
    throw ContractError("select_threshold: unreachable objective kind");
}

std::map<std::string, std::optional<double>> feature_label_correlation(
    const FeatureMatrix& matrix, std::span<const int> labels) {
    if (labels.size() != matrix.rows())
        throw ContractError("feature_label_correlation: label count != row count");
    if (matrix.rows() == 0) throw DataError("feature_label_correlation: empty matrix");
    for (int y : labels)
        if (y != 0 && y != 1)
            throw DataError("feature_label_correlation: labels must be 0 or 1");

    const std::size_t n = matrix.rows();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<double>(labels[i]);
    const double y_sum = vecops::sum(y);
    const double y_mean = y_sum / static_cast<double>(n);
    std::vector<double> yc(n);
    for (std::size_t i = 0; i < n; ++i) yc[i] = y[i] - y_mean;
    const double y_var = vecops::sum_squares(yc);
    if (y_var == 0.0)
        throw DataError("feature_label_correlation: labels have zero variance");

    std::map<std::string, std::optional<double>> out;
    std::vector<double> col(n);
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
        for (std::size_t r = 0; r < n; ++r) col[r] = matrix.at(r, c);
        const double mean = vecops::sum(col) / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) col[r] -= mean;
        const double var = vecops::sum_squares(col);
        if (var == 0.0) {
            out[matrix.columns[c]] = std::nullopt;  // constant column: r undefined
            continue;
        }
        const double cov = vecops::dot(col, yc);
        out[matrix.columns[c]] = cov / std::sqrt(var * y_var);
    }
    return out;
}

}  // namespace fraudkit
