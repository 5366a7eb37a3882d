#pragma once

// ============================================================================
// kernels: positive-definite kernel evaluation, Gram assembly, and the median
// heuristic for bandwidth selection.
//
// Conventions (shared by every consumer of this module):
//   gaussian:   k(a, b) = exp(-||a - b||_2^2 / bandwidth^2)
//   laplacian:  k(a, b) = exp(-||a - b||_1   / bandwidth^2)
//   linear:     k(a, b) = <a, b>                (bandwidth unused)
//
// Point sets are dense matrices with one point per row.
// ============================================================================

#include "codite/common.hpp"

#include <string>

namespace codite::kernels {

enum class Family { gaussian, laplacian, linear };

struct KernelSpec {
    Family family = Family::gaussian;
    double bandwidth = 1.0;

    friend bool operator==(const KernelSpec& a, const KernelSpec& b) {
        if (a.family != b.family) return false;
        return a.family == Family::linear || a.bandwidth == b.bandwidth;
    }
};

// Throws ArgumentError unless the spec is usable (positive finite bandwidth
// for the exponential families).
void validate(const KernelSpec& spec);

std::string family_name(Family family);
Family family_from_name(const std::string& name);  // throws ArgumentError

// Gram block together with the identifiers of the point slices it was built
// from (e.g. "pooled.x" x "group0.x"), for bookkeeping in multi-slice code.
struct GramMatrix {
    Matrix values;
    std::string rows_from;
    std::string cols_from;
};

// k(a, b) for single points; validates dimensions and finiteness.
double eval_kernel(const KernelSpec& spec, const Vector& a, const Vector& b);

// values(i, j) = k(A.row(i), B.row(j)).  Validates once, then assembles
// column-by-column through the runtime-dispatched row kernels; columns are
// independent, so the optional internal threading cannot change results.
GramMatrix gram(const KernelSpec& spec, const Matrix& A, const Matrix& B,
                std::string rows_from = "", std::string cols_from = "");

// Gram values without labels (workhorse used throughout the library).
Matrix gram_values(const KernelSpec& spec, const Matrix& A, const Matrix& B);

// out[i] = k(A.row(i), q) for a single query point; no validation (hot path).
void kernel_column(const KernelSpec& spec, const Matrix& A, const double* q, double* out);

// Median of the Euclidean distances over all distinct index pairs i < j
// (even pair counts average the two central order statistics).  Throws
// ArgumentError for n < 2 and DegenerateInputError when all points coincide.
double median_heuristic(const Matrix& points);

}  // namespace codite::kernels
