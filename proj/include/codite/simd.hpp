#pragma once

// ============================================================================
// simd: runtime-dispatched row kernels for Gram assembly
//
// Points are stored column-major (Eigen default): X is m x d with column j
// starting at X + j*stride.  A "row kernel" fills out[i] = k(X_i, q) for one
// query point q, vectorizing across i.
//
// All variants (scalar / AVX2 / NEON) share one exp algorithm and perform the
// per-element operations in the same order without FMA contraction, so their
// outputs are bit-identical; the equivalence suite asserts this.
// ============================================================================

#include <cstdint>
#include <string>

namespace codite::simd {

enum class Isa { scalar, avx2, neon };

// Shared exp: Cody-Waite reduction + degree-13 Horner polynomial.
// Matches std::exp to a few ulp on [-706, 706]; flushes to 0 below -707.5.
double exp_core(double x);

struct RowKernels {
    // out[i] = exp(-squared_l2(X_i, q) * inv_bw_sq)
    void (*gaussian_row)(const double* X, std::int64_t m, std::int64_t stride, std::int64_t d,
                         const double* q, double inv_bw_sq, double* out);
    // out[i] = exp(-l1(X_i, q) * inv_bw_sq)
    void (*laplacian_row)(const double* X, std::int64_t m, std::int64_t stride, std::int64_t d,
                          const double* q, double inv_bw_sq, double* out);
    // out[i] = dot(X_i, q)
    void (*linear_row)(const double* X, std::int64_t m, std::int64_t stride, std::int64_t d,
                       const double* q, double* out);
};

// Kernels for the requested ISA; throws ArgumentError if unavailable here.
const RowKernels& rows_for(Isa isa);

// Reference implementation (always available).
const RowKernels& rows_scalar();

// Active kernels: best ISA supported by this CPU, overridable by the
// CODITE_SIMD environment variable ("auto", "scalar", "avx2", "neon") or by
// force_isa().  Resolved once, then cached.
const RowKernels& rows();
Isa active_isa();
void force_isa(Isa isa);  // test hook; also resets the cache
void reset_isa();         // back to auto detection

std::string isa_name(Isa isa);

}  // namespace codite::simd
