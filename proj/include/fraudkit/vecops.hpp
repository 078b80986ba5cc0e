#pragma once

#include <cstddef>
#include <span>

namespace fraudkit::vecops {

// Dense double-precision kernels behind a runtime CPU dispatch.
//
// Every backend is bit-identical to the scalar reference by construction:
// reductions accumulate into four interleaved lanes (lane j sees elements
// j, j+4, j+8, ...), the tail of r < 4 elements lands in lanes 0..r-1, and
// lanes combine as (l0 + l2) + (l1 + l3). Element-wise kernels perform the
// same mul-then-add sequence everywhere; the build disables FP contraction
// so no backend fuses a*x+b into an FMA.

enum class Backend { scalar, avx2, neon };

// Kernel function table for one backend; exposed so equivalence tests can
// drive every compiled-in variant directly.
struct KernelTable {
    double (*sum)(const double*, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    double (*l1_distance)(const double*, const double*, std::size_t);
    double (*sum_squares)(const double*, std::size_t);
    double (*squared_error_sum)(const double*, const double*, std::size_t);
    void (*scale)(double*, std::size_t, double);
    void (*axpb)(double*, const double*, std::size_t, double, double);
};

// Backend currently used by the free functions below. Defaults to the widest
// variant this binary carries that the CPU supports; the FRAUDKIT_VECOPS
// environment variable (scalar|avx2|neon|auto) overrides the default.
Backend active_backend();
const char* backend_name(Backend backend);
bool backend_available(Backend backend);

// Switches the active backend; returns false (and keeps the current one) if
// the variant is not compiled in or not supported by this CPU.
bool set_backend(Backend backend);

// ContractError if the backend is unavailable.
const KernelTable& kernels(Backend backend);

double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double l1_distance(std::span<const double> x, std::span<const double> y);
double sum_squares(std::span<const double> x);
// Sum of (p[i] - y[i])^2.
double squared_error_sum(std::span<const double> p, std::span<const double> y);
void scale(std::span<double> x, double a);
// dst[i] = a * x[i] + b; dst may alias x.
void axpb(std::span<double> dst, std::span<const double> x, double a, double b);

}  // namespace fraudkit::vecops
