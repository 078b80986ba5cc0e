#include "fraudkit/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "fraudkit/errors.hpp"
#include "fraudkit/vecops.hpp"

namespace fraudkit {

namespace {

void check_fit_inputs(std::span<const double> scores, std::span<const int> labels,
                      const char* op) {
    if (scores.size() != labels.size())
        throw ContractError(std::string(op) + ": scores/labels size mismatch");
    if (scores.empty()) throw DataError(std::string(op) + ": empty input");
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i]))
            throw DataError(std::string(op) + ": non-finite score");
        if (labels[i] != 0 && labels[i] != 1)
            throw DataError(std::string(op) + ": labels must be 0 or 1");
        pos += static_cast<std::uint64_t>(labels[i]);
    }
    if (pos == 0 || pos == scores.size())
        throw DataError(std::string(op) + ": both classes must be present");
}

double stable_logistic(double z) {
    // 1/(1+exp(z)) without overflow on either tail.
    if (z >= 0.0) {
        double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

}  // namespace

double SigmoidCalibrator::apply_one(double score) const {
    return stable_logistic(a * score + b);
}

std::vector<double> SigmoidCalibrator::apply(std::span<const double> scores) const {
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = apply_one(scores[i]);
    return out;
}

SigmoidCalibrator fit_sigmoid(std::span<const double> scores, std::span<const int> labels) {
    check_fit_inputs(scores, labels, "fit_sigmoid");
    const std::size_t n = scores.size();

    double prior1 = 0.0;
    for (int y : labels) prior1 += y;
    const double prior0 = static_cast<double>(n) - prior1;

    // Smoothed targets keep the fit away from degenerate 0/1 asymptotes.
    const double hi_target = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo_target = 1.0 / (prior0 + 2.0);
    std::vector<double> target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = labels[i] ? hi_target : lo_target;

    constexpr double kRidge = 1e-12;     // Hessian regularizer
    constexpr double kGradTol = 1e-10;   // inf-norm stop
    constexpr double kMinStep = 1e-10;   // line-search floor
    constexpr int kMaxIter = 100;

    double a = 0.0;
    double b = std::log((prior0 + 1.0) / (prior1 + 1.0));

    auto objective = [&](double pa, double pb) {
        // Cross-entropy against the smoothed targets, evaluated stably.
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = pa * scores[i] + pb;
            double t = target[i];
            if (z >= 0.0)
                f += t * z + std::log1p(std::exp(-z));
            else
                f += (t - 1.0) * z + std::log1p(std::exp(z));
        }
        return f;
    };

    SigmoidCalibrator cal;
    double fval = objective(a, b);
    for (int iter = 0; iter < kMaxIter; ++iter) {
        double h11 = kRidge, h22 = kRidge, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = a * scores[i] + b;
            double p = stable_logistic(z);  // model P(y=1)
            double q = 1.0 - p;
            double d2 = p * q;
            h11 += scores[i] * scores[i] * d2;
            h22 += d2;
            h21 += scores[i] * d2;
            double d1 = target[i] - p;
            g1 += scores[i] * d1;
            g2 += d1;
        }
        cal.iterations = iter;
        if (std::fabs(g1) < kGradTol && std::fabs(g2) < kGradTol) {
            cal.converged = true;
            break;
        }

        // Damped Newton: full step first, halved until the objective drops.
        double det = h11 * h22 - h21 * h21;
        double da = -(h22 * g1 - h21 * g2) / det;
        double db = -(-h21 * g1 + h11 * g2) / det;
        double gd = g1 * da + g2 * db;
        double step = 1.0;
        bool moved = false;
        while (step >= kMinStep) {
            double na = a + step * da, nb = b + step * db;
            double nf = objective(na, nb);
            if (nf < fval + 1e-4 * step * gd) {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if (!moved) break;  // line search exhausted: flat landscape
    }

    cal.a = a;
    cal.b = b;
    cal.orientation_flipped = a > 0.0;
    return cal;
}

double IsotonicCalibrator::apply_one(double score) const {
    if (breakpoints.empty()) throw ContractError("isotonic calibrator not fitted");
    // Piecewise-constant step: value of the greatest breakpoint <= score,
    // clamped to the first value below the fitted range.
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), score);
    if (it == breakpoints.begin()) return values.front();
    return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
}

std::vector<double> IsotonicCalibrator::apply(std::span<const double> scores) const {
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = apply_one(scores[i]);
    return out;
}

IsotonicCalibrator fit_isotonic(std::span<const double> scores, std::span<const int> labels) {
    check_fit_inputs(scores, labels, "fit_isotonic");
    const std::size_t n = scores.size();

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return scores[x] < scores[y];
    });

    // Pre-pool identical scores (their fitted value is necessarily shared),
    // making the result independent of input order.
    struct Block {
        double score;      // representative (group) score
        double sum_y;
        double weight;
        std::size_t groups;  // how many score-groups this block spans
        double value() const { return sum_y / weight; }
    };
    std::vector<Block> pooled;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        double s = scores[order[i]];
        double sum_y = 0.0;
        while (j < n && scores[order[j]] == s) {
            sum_y += labels[order[j]];
            ++j;
        }
        pooled.push_back({s, sum_y, static_cast<double>(j - i), 1});
        i = j;
    }

    // Pool-adjacent-violators over the score-sorted groups.
    std::vector<Block> stack;
    std::vector<double> group_scores;
    group_scores.reserve(pooled.size());
    for (const Block& g : pooled) {
        group_scores.push_back(g.score);
        stack.push_back(g);
        while (stack.size() >= 2 &&
               stack[stack.size() - 2].value() > stack.back().value()) {
            Block top = stack.back();
            stack.pop_back();
            Block& prev = stack.back();
            prev.sum_y += top.sum_y;
            prev.weight += top.weight;
            prev.groups += top.groups;
        }
    }

    IsotonicCalibrator cal;
    cal.breakpoints = std::move(group_scores);
    cal.values.reserve(cal.breakpoints.size());
    for (const Block& blk : stack)
        for (std::size_t g = 0; g < blk.groups; ++g) cal.values.push_back(blk.value());
    return cal;
}

double brier_score(std::span<const double> probabilities, std::span<const int> labels) {
    if (probabilities.size() != labels.size())
        throw ContractError("brier_score: probabilities/labels size mismatch");
    if (probabilities.empty()) throw DataError("brier_score: empty input");
    std::vector<double> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!(probabilities[i] >= 0.0 && probabilities[i] <= 1.0))
            throw DataError("brier_score: probability outside [0,1]");
        if (labels[i] != 0 && labels[i] != 1)
            throw DataError("brier_score: labels must be 0 or 1");
        y[i] = static_cast<double>(labels[i]);
    }
    return vecops::squared_error_sum(probabilities, y) /
           static_cast<double>(probabilities.size());
}

ReliabilityTable reliability_table(std::span<const double> probabilities,
                                   std::span<const int> labels, std::size_t n_bins) {
    if (n_bins < 2) throw ContractError("reliability_table: n_bins must be >= 2");
    if (probabilities.size() != labels.size())
        throw ContractError("reliability_table: probabilities/labels size mismatch");

    ReliabilityTable table;
    table.bins.resize(n_bins);
    std::vector<double> sum_p(n_bins, 0.0);
    std::vector<std::uint64_t> sum_y(n_bins, 0);
    for (std::size_t b = 0; b < n_bins; ++b) {
        table.bins[b].lower = static_cast<double>(b) / static_cast<double>(n_bins);
        table.bins[b].upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
    }

    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        double p = probabilities[i];
        if (!(p >= 0.0 && p <= 1.0))
            throw DataError("reliability_table: probability outside [0,1]");
        if (labels[i] != 0 && labels[i] != 1)
            throw DataError("reliability_table: labels must be 0 or 1");
        // Equal-width bins, final bin right-closed so p=1 lands inside.
        auto b = std::min(n_bins - 1,
                          static_cast<std::size_t>(p * static_cast<double>(n_bins)));
        table.bins[b].count++;
        sum_p[b] += p;
        sum_y[b] += static_cast<std::uint64_t>(labels[i]);
    }

    for (std::size_t b = 0; b < n_bins; ++b) {
        if (table.bins[b].count == 0) continue;
        double cnt = static_cast<double>(table.bins[b].count);
        table.bins[b].mean_predicted = sum_p[b] / cnt;
        table.bins[b].empirical_frequency = static_cast<double>(sum_y[b]) / cnt;
    }
    return table;
}

}  // namespace fraudkit
