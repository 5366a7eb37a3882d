// AVX2 row kernels.  Compiled on x86-64 with per-function target attributes;
// only invoked after a runtime CPU check.  Operation order mirrors the scalar
// reference exactly (no FMA), so outputs are bit-identical to it.

#include "codite/simd.hpp"

#include "simd_common.hpp"

#include <cmath>

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

namespace codite::simd {
namespace {

using detail::kExpPoly;

__attribute__((target("avx2"))) inline __m256d exp4(__m256d x) {
    // Valid for the row-kernel domain x <= 0; lanes below the underflow
    // threshold are flushed to +0 exactly as the scalar path does.
    const __m256d kd = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(detail::kLog2E)),
                                       _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_sub_pd(x, _mm256_mul_pd(kd, _mm256_set1_pd(detail::kLn2Hi)));
    r = _mm256_sub_pd(r, _mm256_mul_pd(kd, _mm256_set1_pd(detail::kLn2Lo)));
    __m256d p = _mm256_set1_pd(kExpPoly[13]);
    for (int k = 12; k >= 0; --k) {
        p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(kExpPoly[k]));
    }
    const __m256i ki = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(kd));
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ki, _mm256_set1_epi64x(1023)), 52);
    const __m256d scaled = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
    const __m256d under = _mm256_cmp_pd(x, _mm256_set1_pd(detail::kExpUnderflow), _CMP_LT_OQ);
    return _mm256_andnot_pd(under, scaled);
}

__attribute__((target("avx2"))) void gaussian_row_avx2(const double* X, std::int64_t m,
                                                       std::int64_t stride, std::int64_t d,
                                                       const double* q, double inv_bw_sq,
                                                       double* out) {
    const __m256d neg_inv = _mm256_set1_pd(-inv_bw_sq);
    std::int64_t i = 0;
    for (; i + 4 <= m; i += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::int64_t j = 0; j < d; ++j) {
            const __m256d x = _mm256_loadu_pd(X + i + j * stride);
            const __m256d diff = _mm256_sub_pd(x, _mm256_set1_pd(q[j]));
            acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
        }
        _mm256_storeu_pd(out + i, exp4(_mm256_mul_pd(acc, neg_inv)));
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

__attribute__((target("avx2"))) void laplacian_row_avx2(const double* X, std::int64_t m,
                                                        std::int64_t stride, std::int64_t d,
                                                        const double* q, double inv_bw_sq,
                                                        double* out) {
    const __m256d neg_inv = _mm256_set1_pd(-inv_bw_sq);
    const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
    std::int64_t i = 0;
    for (; i + 4 <= m; i += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::int64_t j = 0; j < d; ++j) {
            const __m256d x = _mm256_loadu_pd(X + i + j * stride);
            const __m256d diff = _mm256_sub_pd(x, _mm256_set1_pd(q[j]));
            acc = _mm256_add_pd(acc, _mm256_and_pd(diff, abs_mask));
        }
        _mm256_storeu_pd(out + i, exp4(_mm256_mul_pd(acc, neg_inv)));
    }
    for (; i < m; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            acc = acc + std::fabs(X[i + j * stride] - q[j]);
        }
        out[i] = exp_core(-acc * inv_bw_sq);
    }
}

__attribute__((target("avx2"))) void linear_row_avx2(const double* X, std::int64_t m,
                                                     std::int64_t stride, std::int64_t d,
                                                     const double* q, double* out) {
    std::int64_t i = 0;
    for (; i + 4 <= m; i += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::int64_t j = 0; j < d; ++j) {
            const __m256d x = _mm256_loadu_pd(X + i + j * stride);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(x, _mm256_set1_pd(q[j])));
        }
        _mm256_storeu_pd(out + i, acc);
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

const RowKernels* rows_avx2_impl() {
    static const RowKernels kernels{gaussian_row_avx2, laplacian_row_avx2, linear_row_avx2};
    return &kernels;
}

}  // namespace codite::simd

#else

namespace codite::simd {
const RowKernels* rows_avx2_impl() { return nullptr; }
}  // namespace codite::simd

#endif
