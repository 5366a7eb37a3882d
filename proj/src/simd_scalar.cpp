#include "codite/simd.hpp"

#include "simd_common.hpp"

#include <cmath>

namespace codite::simd {

double exp_core(double x) {
    using namespace detail;
    if (std::isnan(x)) return x;
    if (x > kExpOverflow) return HUGE_VAL;
    if (x < kExpUnderflow) return 0.0;
    const double kd = std::nearbyint(x * kLog2E);
    double r = x - kd * kLn2Hi;
    r = r - kd * kLn2Lo;
    const double p = exp_poly(r);
    const auto k = static_cast<std::int64_t>(kd);
    if (k > 1020) return ldexp_fast(p, k - 512) * 0x1.0p512;  // only near overflow
    return ldexp_fast(p, k);
}

namespace {

void gaussian_row_scalar(const double* X, std::int64_t m, std::int64_t stride, std::int64_t d,
                         const double* q, double inv_bw_sq, double* out) {
    for (std::int64_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double diff = X[i + j * stride] - q[j];
            acc = acc + diff * diff;
        }
        out[i] = exp_core(-acc * inv_bw_sq);
    }
}

void laplacian_row_scalar(const double* X, std::int64_t m, std::int64_t stride, std::int64_t d,
                          const double* q, double inv_bw_sq, double* out) {
    for (std::int64_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            acc = acc + std::fabs(X[i + j * stride] - q[j]);
        }
        out[i] = exp_core(-acc * inv_bw_sq);
    }
}

void linear_row_scalar(const double* X, std::int64_t m, std::int64_t stride, std::int64_t d,
                       const double* q, double* out) {
    for (std::int64_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            acc = acc + X[i + j * stride] * q[j];
        }
        out[i] = acc;
    }
}

}  // namespace

const RowKernels& rows_scalar() {
    static const RowKernels kernels{gaussian_row_scalar, laplacian_row_scalar, linear_row_scalar};
    return kernels;
}

}  // namespace codite::simd
