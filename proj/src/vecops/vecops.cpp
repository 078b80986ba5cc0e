#include "fraudkit/vecops.hpp"

#include <cstdlib>
#include <string_view>

#include "fraudkit/errors.hpp"
#include "vecops_kernels.inc"

namespace fraudkit::vecops {

#if defined(FRAUDKIT_HAVE_AVX2)
// Defined in vecops_avx2.cpp.
const KernelTable& avx2_kernel_table();
#endif
#if defined(FRAUDKIT_HAVE_NEON)
// Defined in vecops_neon.cpp.
const KernelTable& neon_kernel_table();
#endif

namespace {

const KernelTable kScalarTable = {
    &scalar_kernels::sum,
    &scalar_kernels::dot,
    &scalar_kernels::l1_distance,
    &scalar_kernels::sum_squares,
    &scalar_kernels::squared_error_sum,
    &scalar_kernels::scale,
    &scalar_kernels::axpb,
};

bool cpu_supports(Backend backend) {
    switch (backend) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(FRAUDKIT_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") != 0;
#else
            return false;
#endif
        case Backend::neon:
#if defined(FRAUDKIT_HAVE_NEON)
            return true;  // baseline on every aarch64 build target
#else
            return false;
#endif
    }
    return false;
}

Backend pick_default() {
    if (const char* env = std::getenv("FRAUDKIT_VECOPS")) {
        std::string_view v(env);
        if (v == "scalar") return Backend::scalar;
        if (v == "avx2" && cpu_supports(Backend::avx2)) return Backend::avx2;
        if (v == "neon" && cpu_supports(Backend::neon)) return Backend::neon;
        // unknown value or unsupported request: fall through to auto
    }
    if (cpu_supports(Backend::avx2)) return Backend::avx2;
    if (cpu_supports(Backend::neon)) return Backend::neon;
    return Backend::scalar;
}

struct Dispatch {
    Backend backend;
    const KernelTable* table;
    Dispatch() : backend(pick_default()), table(&kernels(backend)) {}
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

}  // namespace

const KernelTable& kernels(Backend backend) {
    switch (backend) {
        case Backend::scalar:
            return kScalarTable;
        case Backend::avx2:
#if defined(FRAUDKIT_HAVE_AVX2)
            if (cpu_supports(Backend::avx2)) return avx2_kernel_table();
#endif
            break;
        case Backend::neon:
#if defined(FRAUDKIT_HAVE_NEON)
            return neon_kernel_table();
#endif
            break;
    }
    throw ContractError(std::string("vecops backend unavailable: ") +
                        backend_name(backend));
}

Backend active_backend() { return dispatch().backend; }

const char* backend_name(Backend backend) {
    switch (backend) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

bool backend_available(Backend backend) { return cpu_supports(backend); }

bool set_backend(Backend backend) {
    if (!cpu_supports(backend)) return false;
    dispatch().backend = backend;
    dispatch().table = &kernels(backend);
    return true;
}

double sum(std::span<const double> x) {
    return dispatch().table->sum(x.data(), x.size());
}

double dot(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ContractError("vecops::dot: size mismatch");
    return dispatch().table->dot(x.data(), y.data(), x.size());
}

double l1_distance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ContractError("vecops::l1_distance: size mismatch");
    return dispatch().table->l1_distance(x.data(), y.data(), x.size());
}

double sum_squares(std::span<const double> x) {
    return dispatch().table->sum_squares(x.data(), x.size());
}

double squared_error_sum(std::span<const double> p, std::span<const double> y) {
    if (p.size() != y.size())
        throw ContractError("vecops::squared_error_sum: size mismatch");
    return dispatch().table->squared_error_sum(p.data(), y.data(), p.size());
}

void scale(std::span<double> x, double a) {
    dispatch().table->scale(x.data(), x.size(), a);
}

void axpb(std::span<double> dst, std::span<const double> x, double a, double b) {
    if (dst.size() != x.size()) throw ContractError("vecops::axpb: size mismatch");
    dispatch().table->axpb(dst.data(), x.data(), dst.size(), a, b);
}

}  // namespace fraudkit::vecops
