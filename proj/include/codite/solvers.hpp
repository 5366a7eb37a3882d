#pragma once

// ============================================================================
// solvers: dense symmetric linear algebra shared by every estimator — SPD
// ridge solves, symmetric eigendecomposition, and the Kronecker-structured
// ridge solve behind arity-2 U-statistic regression.
//
// No explicit matrix inverse is ever formed; ridge systems are applied
// through factored solves.
// ============================================================================

#include "codite/common.hpp"

namespace codite::solvers {

// Shared ridge policy: nominal ridge with a trace-scaled floor guarding
// degenerate Gram matrices.
inline double effective_ridge(double nominal, double trace) {
    return std::max(nominal, 1e-10 * trace);
}

// Cholesky handle for M + ridge*I.
class SpdFactor {
public:
    // Factors M + ridge*I.  M must be symmetric; throws NumericError naming
    // the smallest pivot if the shifted matrix is not positive definite.
    SpdFactor(const Matrix& M, double ridge);

    Eigen::Index size() const { return llt_.matrixLLT().rows(); }
    double ridge() const { return ridge_; }

    Matrix solve(const Matrix& B) const;
    Vector solve(const Vector& b) const;

    // Solution written over B in place (avoids a copy on large right-hand sides).
    void solve_in_place(Matrix& B) const;

private:
    Eigen::LLT<Matrix> llt_;
    double ridge_ = 0.0;
};

// X with (M + ridge*I) X = B.
Matrix spd_solve(const Matrix& M, double ridge, const Matrix& B);
Vector spd_solve(const Matrix& M, double ridge, const Vector& b);

struct EigenSym {
    Vector values;   // ascending
    Matrix vectors;  // orthonormal columns, M = vectors * diag(values) * vectors^T
};

EigenSym sym_eigen(const Matrix& M);

// Solves (K^{(x)r} + ridge*I) c = rhs where K^{(x)r} is the r-fold Kronecker
// power of K and tuples are flattened lexicographically (first index most
// significant).  r = 2 runs through a single n x n eigendecomposition; r >= 3
// falls back to a dense solve guarded by n^r <= 4096.
Vector kron_ridge_solve(const Matrix& K, double ridge, const Vector& rhs, int r = 2);

}  // namespace codite::solvers
