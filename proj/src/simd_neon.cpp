// NEON row kernels (aarch64 only).  Mirrors the scalar reference operation
// order without FMA so results stay bit-identical to it.

#include "codite/simd.hpp"

#include "simd_common.hpp"

#include <cmath>

#if defined(__aarch64__)

#include <arm_neon.h>

namespace codite::simd {
namespace {

using detail::kExpPoly;

inline float64x2_t exp2lane(float64x2_t x) {
    const float64x2_t kd = vrndnq_f64(vmulq_f64(x, vdupq_n_f64(detail::kLog2E)));
    float64x2_t r = vsubq_f64(x, vmulq_f64(kd, vdupq_n_f64(detail::kLn2Hi)));
    r = vsubq_f64(r, vmulq_f64(kd, vdupq_n_f64(detail::kLn2Lo)));
    float64x2_t p = vdupq_n_f64(kExpPoly[13]);
    for (int k = 12; k >= 0; --k) {
        p = vaddq_f64(vmulq_f64(p, r), vdupq_n_f64(kExpPoly[k]));
    }
    const int64x2_t ki = vcvtq_s64_f64(kd);
    const int64x2_t bits = vshlq_n_s64(vaddq_s64(ki, vdupq_n_s64(1023)), 52);
    const float64x2_t scaled = vmulq_f64(p, vreinterpretq_f64_s64(bits));
    const uint64x2_t under = vcltq_f64(x, vdupq_n_f64(detail::kExpUnderflow));
    return vreinterpretq_f64_u64(vbicq_u64(vreinterpretq_u64_f64(scaled), under));
}

void gaussian_row_neon(const double* X, std::int64_t m, std::int64_t stride, std::int64_t d,
                       const double* q, double inv_bw_sq, double* out) {
    const float64x2_t neg_inv = vdupq_n_f64(-inv_bw_sq);
    std::int64_t i = 0;
    for (; i + 2 <= m; i += 2) {
        float64x2_t acc = vdupq_n_f64(0.0);
        for (std::int64_t j = 0; j < d; ++j) {
            const float64x2_t x = vld1q_f64(X + i + j * stride);
            const float64x2_t diff = vsubq_f64(x, vdupq_n_f64(q[j]));
            acc = vaddq_f64(acc, vmulq_f64(diff, diff));
        }
        vst1q_f64(out + i, exp2lane(vmulq_f64(acc, neg_inv)));
    }
    for (; i < m; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double diff = X[i + j * stride] - q[j];
            acc = acc + diff * diff;
        }
        out[i] = exp_core(-acc * inv_bw_sq);
    }
}

void laplacian_row_neon(const double* X, std::int64_t m, std::int64_t stride, std::int64_t d,
                        const double* q, double inv_bw_sq, double* out) {
    const float64x2_t neg_inv = vdupq_n_f64(-inv_bw_sq);
    std::int64_t i = 0;
    for (; i + 2 <= m; i += 2) {
        float64x2_t acc = vdupq_n_f64(0.0);
        for (std::int64_t j = 0; j < d; ++j) {
            const float64x2_t x = vld1q_f64(X + i + j * stride);
            const float64x2_t diff = vsubq_f64(x, vdupq_n_f64(q[j]));
            acc = vaddq_f64(acc, vabsq_f64(diff));
        }
        vst1q_f64(out + i, exp2lane(vmulq_f64(acc, neg_inv)));
    }
    for (; i < m; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            acc = acc + std::fabs(X[i + j * stride] - q[j]);
        }
        out[i] = exp_core(-acc * inv_bw_sq);
    }
}

void linear_row_neon(const double* X, std::int64_t m, std::int64_t stride, std::int64_t d,
                     const double* q, double* out) {
    std::int64_t i = 0;
    for (; i + 2 <= m; i += 2) {
        float64x2_t acc = vdupq_n_f64(0.0);
        for (std::int64_t j = 0; j < d; ++j) {
            const float64x2_t x = vld1q_f64(X + i + j * stride);
            acc = vaddq_f64(acc, vmulq_f64(x, vdupq_n_f64(q[j])));
        }
        vst1q_f64(out + i, acc);
    }
    for (; i < m; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            acc = acc + X[i + j * stride] * q[j];
        }
        out[i] = acc;
    }
}

}  // namespace

const RowKernels* rows_neon_impl() {
    static const RowKernels kernels{gaussian_row_neon, laplacian_row_neon, linear_row_neon};
    return &kernels;
}

}  // namespace codite::simd

#else

namespace codite::simd {
const RowKernels* rows_neon_impl() { return nullptr; }
}  // namespace codite::simd

#endif
