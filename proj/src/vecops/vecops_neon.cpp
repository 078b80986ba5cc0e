// NEON kernel variants (aarch64). Two float64x2 registers model lanes
// {0,1} and {2,3} of the canonical 4-lane reduction; tails and the final
// (l0 + l2) + (l1 + l3) combine mirror the scalar reference exactly, and no
// fused multiply-add instructions are used (vmlaq is avoided).

#include <arm_neon.h>

#include <cmath>
#include <cstddef>

#include "fraudkit/vecops.hpp"

namespace fraudkit::vecops {

namespace {

struct Lanes {
    double l[4];
    double combine() const { return (l[0] + l[2]) + (l[1] + l[3]); }
};

inline Lanes store(float64x2_t a01, float64x2_t a23) {
    Lanes out;
    vst1q_f64(out.l, a01);
    vst1q_f64(out.l + 2, a23);
    return out;
}

double sum_neon(const double* x, std::size_t n) {
    float64x2_t a01 = vdupq_n_f64(0.0), a23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a01 = vaddq_f64(a01, vld1q_f64(x + i));
        a23 = vaddq_f64(a23, vld1q_f64(x + i + 2));
    }
    Lanes acc = store(a01, a23);
    if (i < n) acc.l[0] += x[i++];
    if (i < n) acc.l[1] += x[i++];
    if (i < n) acc.l[2] += x[i];
    return acc.combine();
}

double dot_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t a01 = vdupq_n_f64(0.0), a23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a01 = vaddq_f64(a01, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
        a23 = vaddq_f64(a23, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
    }
    Lanes acc = store(a01, a23);
    if (i < n) { acc.l[0] += x[i] * y[i]; ++i; }
    if (i < n) { acc.l[1] += x[i] * y[i]; ++i; }
    if (i < n) { acc.l[2] += x[i] * y[i]; }
    return acc.combine();
}

double l1_distance_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t a01 = vdupq_n_f64(0.0), a23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a01 = vaddq_f64(a01, vabsq_f64(vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i))));
        a23 = vaddq_f64(a23,
                        vabsq_f64(vsubq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2))));
    }
    Lanes acc = store(a01, a23);
    if (i < n) { acc.l[0] += std::fabs(x[i] - y[i]); ++i; }
    if (i < n) { acc.l[1] += std::fabs(x[i] - y[i]); ++i; }
    if (i < n) { acc.l[2] += std::fabs(x[i] - y[i]); }
    return acc.combine();
}

double sum_squares_neon(const double* x, std::size_t n) {
    float64x2_t a01 = vdupq_n_f64(0.0), a23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float64x2_t v01 = vld1q_f64(x + i), v23 = vld1q_f64(x + i + 2);
        a01 = vaddq_f64(a01, vmulq_f64(v01, v01));
        a23 = vaddq_f64(a23, vmulq_f64(v23, v23));
    }
    Lanes acc = store(a01, a23);
    if (i < n) { acc.l[0] += x[i] * x[i]; ++i; }
    if (i < n) { acc.l[1] += x[i] * x[i]; ++i; }
    if (i < n) { acc.l[2] += x[i] * x[i]; }
    return acc.combine();
}

double squared_error_sum_neon(const double* p, const double* y, std::size_t n) {
    float64x2_t a01 = vdupq_n_f64(0.0), a23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float64x2_t d01 = vsubq_f64(vld1q_f64(p + i), vld1q_f64(y + i));
        float64x2_t d23 = vsubq_f64(vld1q_f64(p + i + 2), vld1q_f64(y + i + 2));
        a01 = vaddq_f64(a01, vmulq_f64(d01, d01));
        a23 = vaddq_f64(a23, vmulq_f64(d23, d23));
    }
    Lanes acc = store(a01, a23);
    if (i < n) { double d = p[i] - y[i]; acc.l[0] += d * d; ++i; }
    if (i < n) { double d = p[i] - y[i]; acc.l[1] += d * d; ++i; }
    if (i < n) { double d = p[i] - y[i]; acc.l[2] += d * d; }
    return acc.combine();
}

void scale_neon(double* x, std::size_t n, double a) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), va));
    if (i < n) x[i] = x[i] * a;
}

void axpb_neon(double* dst, const double* x, std::size_t n, double a, double b) {
    const float64x2_t va = vdupq_n_f64(a);
    const float64x2_t vb = vdupq_n_f64(b);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(dst + i, vaddq_f64(vmulq_f64(va, vld1q_f64(x + i)), vb));
    if (i < n) dst[i] = a * x[i] + b;
}

}  // namespace

const KernelTable& neon_kernel_table() {
    static const KernelTable table = {
        &sum_neon,
        &dot_neon,
        &l1_distance_neon,
        &sum_squares_neon,
        &squared_error_sum_neon,
        &scale_neon,
        &axpb_neon,
    };
    return table;
}

}  // namespace fraudkit::vecops
