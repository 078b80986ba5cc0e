#pragma once

#include <cstdint>

#include <span>
#include <vector>

namespace fraudkit {

// Platt scaling: s -> 1/(1+exp(a*s+b)), fitted by cross-entropy. On
// positively-oriented scores (higher = more likely positive) the fitted
// slope a is negative; `orientation_flipped` flags the inverted case.
struct SigmoidCalibrator {
    double a = 0.0;
    double b = 0.0;
    bool orientation_flipped = false;  // a > 0 after fit: scores anti-correlate
    bool converged = false;
    int iterations = 0;

    double apply_one(double score) const;
    std::vector<double> apply(std::span<const double> scores) const;
};

// Isotonic regression: piecewise-constant nondecreasing map, clamped to the
// end values outside the fitted score range.
struct IsotonicCalibrator {
    std::vector<double> breakpoints;  // ascending distinct fitted scores
    std::vector<double> values;       // nondecreasing probabilities at each breakpoint

    double apply_one(double score) const;
    std::vector<double> apply(std::span<const double> scores) const;
};

// Both fitters demand both classes present (DataError otherwise) and finite
// scores. fit_sigmoid uses damped Newton on the smoothed Platt targets
// t+ = (N+ + 1)/(N+ + 2), t- = 1/(N- + 2), stopping at gradient inf-norm
// < 1e-10 or 100 iterations. fit_isotonic pre-pools tied scores then runs
// pool-adjacent-violators, so input order never matters.
SigmoidCalibrator fit_sigmoid(std::span<const double> scores, std::span<const int> labels);
IsotonicCalibrator fit_isotonic(std::span<const double> scores, std::span<const int> labels);

// Mean of (p - y)^2; p must lie in [0,1], labels in {0,1}; empty → DataError.
double brier_score(std::span<const double> probabilities, std::span<const int> labels);

struct ReliabilityBin {
    double lower = 0.0;
    double upper = 0.0;
    double mean_predicted = 0.0;       // meaningful only when count > 0
    double empirical_frequency = 0.0;  // meaningful only when count > 0
    std::uint64_t count = 0;
};

struct ReliabilityTable {
    std::vector<ReliabilityBin> bins;  // equal-width partition of [0,1]
};

// Equal-width bins over [0,1]; every bin [lo, hi) except the final [lo, 1].
// Empty bins are emitted with count 0. n_bins >= 2.
ReliabilityTable reliability_table(std::span<const double> probabilities,
                                   std::span<const int> labels, std::size_t n_bins);

}  // namespace fraudkit
