// AVX2 kernel variants. Compiled with -mavx2 only; never executed unless the
// runtime dispatcher verified CPU support.
//
// Bit-identity with the scalar reference: a __m256d accumulator *is* the four
// interleaved scalar lanes, tails add into lanes 0..r-1, and the horizontal
// combine is the same (l0 + l2) + (l1 + l3). Only `add` and `mul` are used
// (no FMA), matching the contraction-free scalar code.

#include <immintrin.h>

#include <cstddef>

#include "fraudkit/vecops.hpp"

namespace fraudkit::vecops {

namespace {

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    alignas(32) double l[4];
    _mm256_store_pd(l, acc);
    if (i < n) l[0] += x[i++];
    if (i < n) l[1] += x[i++];
    if (i < n) l[2] += x[i];
    return (l[0] + l[2]) + (l[1] + l[3]);
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    alignas(32) double l[4];
    _mm256_store_pd(l, acc);
    if (i < n) { l[0] += x[i] * y[i]; ++i; }
    if (i < n) { l[1] += x[i] * y[i]; ++i; }
    if (i < n) { l[2] += x[i] * y[i]; }
    return (l[0] + l[2]) + (l[1] + l[3]);
}

inline __m256d abs_pd(__m256d v) {
    const __m256d sign = _mm256_set1_pd(-0.0);
    return _mm256_andnot_pd(sign, v);
}

double l1_distance_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_add_pd(acc, abs_pd(d));
    }
    alignas(32) double l[4];
    _mm256_store_pd(l, acc);
    if (i < n) { l[0] += __builtin_fabs(x[i] - y[i]); ++i; }
    if (i < n) { l[1] += __builtin_fabs(x[i] - y[i]); ++i; }
    if (i < n) { l[2] += __builtin_fabs(x[i] - y[i]); }
    return (l[0] + l[2]) + (l[1] + l[3]);
}

double sum_squares_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    alignas(32) double l[4];
    _mm256_store_pd(l, acc);
    if (i < n) { l[0] += x[i] * x[i]; ++i; }
    if (i < n) { l[1] += x[i] * x[i]; ++i; }
    if (i < n) { l[2] += x[i] * x[i]; }
    return (l[0] + l[2]) + (l[1] + l[3]);
}

double squared_error_sum_avx2(const double* p, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + i), _mm256_loadu_pd(y + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    alignas(32) double l[4];
    _mm256_store_pd(l, acc);
    if (i < n) { double d = p[i] - y[i]; l[0] += d * d; ++i; }
    if (i < n) { double d = p[i] - y[i]; l[1] += d * d; ++i; }
    if (i < n) { double d = p[i] - y[i]; l[2] += d * d; }
    return (l[0] + l[2]) + (l[1] + l[3]);
}

void scale_avx2(double* x, std::size_t n, double a) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    for (; i < n; ++i) x[i] = x[i] * a;
}

void axpb_avx2(double* dst, const double* x, std::size_t n, double a, double b) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(dst + i,
                         _mm256_add_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + i)), vb));
    for (; i < n; ++i) dst[i] = a * x[i] + b;
}

}  // namespace

const KernelTable& avx2_kernel_table() {
    static const KernelTable table = {
        &sum_avx2,
        &dot_avx2,
        &l1_distance_avx2,
        &sum_squares_avx2,
        &squared_error_sum_avx2,
        &scale_avx2,
        &axpb_avx2,
    };
    return table;
}

}  // namespace fraudkit::vecops
