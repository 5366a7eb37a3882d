#include "codite/solvers.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace codite::solvers {

namespace {

void check_square_symmetric(const Matrix& M, const char* who) {
    if (M.rows() != M.cols()) {
        throw ArgumentError(std::string(who) + ": matrix must be square, got " +
                            std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
    }
    if (M.size() == 0) {
        throw ArgumentError(std::string(who) + ": matrix must be non-empty");
    }
    if (!M.allFinite()) {
        throw ArgumentError(std::string(who) + ": matrix contains NaN or Inf");
    }
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * scale) {
        throw ArgumentError(std::string(who) + ": matrix is not symmetric (max asymmetry " +
                            std::to_string(asym) + ")");
    }
}

// Unblocked Cholesky retracing the failure to report the offending pivot.
[[noreturn]] void report_indefinite(const Matrix& A) {
    Matrix L = Matrix::Zero(A.rows(), A.cols());
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < A.rows(); ++k) {
        double pivot = A(k, k) - L.row(k).head(k).squaredNorm();
        smallest = std::min(smallest, pivot);
        if (pivot <= 0.0) {
            throw NumericError("spd factorization failed: pivot " + std::to_string(k) +
                               " is " + std::to_string(pivot) +
                               " (matrix + ridge is not positive definite)");
        }
        L(k, k) = std::sqrt(pivot);
        for (Eigen::Index i = k + 1; i < A.rows(); ++i) {
            L(i, k) = (A(i, k) - L.row(i).head(k).dot(L.row(k).head(k))) / L(k, k);
        }
    }
    throw NumericError("spd factorization failed: smallest pivot " + std::to_string(smallest));
}

}  // namespace

SpdFactor::SpdFactor(const Matrix& M, double ridge) : ridge_(ridge) {
    check_square_symmetric(M, "spd_solve");
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
        throw ArgumentError("spd_solve: ridge must be non-negative and finite");
    }
    Matrix shifted = M;
    shifted.diagonal().array() += ridge;
    llt_.compute(shifted);
    if (llt_.info() != Eigen::Success) report_indefinite(shifted);
}

Matrix SpdFactor::solve(const Matrix& B) const {
    if (B.rows() != size()) {
        throw ArgumentError("spd_solve: right-hand side has " + std::to_string(B.rows()) +
                            " rows, expected " + std::to_string(size()));
    }
    return llt_.solve(B);
}

Vector SpdFactor::solve(const Vector& b) const {
    if (b.size() != size()) {
        throw ArgumentError("spd_solve: right-hand side has " + std::to_string(b.size()) +
                            " rows, expected " + std::to_string(size()));
    }
    return llt_.solve(b);
}

void SpdFactor::solve_in_place(Matrix& B) const {
    if (B.rows() != size()) {
        throw ArgumentError("spd_solve: right-hand side has " + std::to_string(B.rows()) +
                            " rows, expected " + std::to_string(size()));
    }
    llt_.solveInPlace(B);
}

Matrix spd_solve(const Matrix& M, double ridge, const Matrix& B) {
    return SpdFactor(M, ridge).solve(B);
}

Vector spd_solve(const Matrix& M, double ridge, const Vector& b) {
    return SpdFactor(M, ridge).solve(b);
}

EigenSym sym_eigen(const Matrix& M) {
    check_square_symmetric(M, "sym_eigen");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(M);
    if (solver.info() != Eigen::Success) {
        throw NumericError("sym_eigen: eigendecomposition did not converge");
    }
    return EigenSym{solver.eigenvalues(), solver.eigenvectors()};
}

namespace {

Vector kron_ridge_solve_dense(const Matrix& K, double ridge, const Vector& rhs, int r) {
    const auto n = K.rows();
    double size_d = 1.0;
    for (int t = 0; t < r; ++t) size_d *= static_cast<double>(n);
    if (size_d > 4096.0) {
        throw ArgumentError("kron_ridge_solve: dense fallback refuses n^r = " +
                            std::to_string(size_d) + " > 4096 (n=" + std::to_string(n) +
                            ", r=" + std::to_string(r) + ")");
    }
    // Iterated Kronecker power, lexicographic flattening.
    Matrix power = K;
    for (int t = 1; t < r; ++t) {
        const auto rows = power.rows();
        Matrix next(rows * n, rows * n);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < rows; ++j) next.block(i * n, j * n, n, n) = power(i, j) * K;
        power = std::move(next);
    }
    return SpdFactor(power, ridge).solve(rhs);
}

}  // namespace

Vector kron_ridge_solve(const Matrix& K, double ridge, const Vector& rhs, int r) {
    check_square_symmetric(K, "kron_ridge_solve");
    if (!(ridge > 0.0) || !std::isfinite(ridge)) {
        throw ArgumentError("kron_ridge_solve: ridge must be positive and finite");
    }
    if (r < 1) throw ArgumentError("kron_ridge_solve: arity must be >= 1");
    const auto n = K.rows();
    double expected = 1.0;
    for (int t = 0; t < r; ++t) expected *= static_cast<double>(n);
    if (static_cast<double>(rhs.size()) != expected) {
        throw ArgumentError("kron_ridge_solve: rhs length " + std::to_string(rhs.size()) +
                            " does not equal n^r = " + std::to_string(expected));
    }

    if (r == 1) return SpdFactor(K, ridge).solve(rhs);
    if (r >= 3) return kron_ridge_solve_dense(K, ridge, rhs, r);

    // r = 2: (K (x) K + ridge I) vec(C) = vec(R) is the matrix equation
    // K C K + ridge C = R.  With K = V diag(w) V^T this reduces entrywise:
    // (V^T C V)_{ij} = (V^T R V)_{ij} / (w_i w_j + ridge).
    const EigenSym eig = sym_eigen(K);
    using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                       Eigen::RowMajor>>;
    const RowMajorMap R(rhs.data(), n, n);
    Matrix tilde = eig.vectors.transpose() * R * eig.vectors;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double denom = eig.values(i) * eig.values(j) + ridge;
            if (denom <= 0.0) {
                throw NumericError("kron_ridge_solve: non-positive spectral denominator " +
                                   std::to_string(denom));
            }
            tilde(i, j) /= denom;
        }
    }
    const Matrix C = eig.vectors * tilde * eig.vectors.transpose();
    Vector out(n * n);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        out.data(), n, n) = C;
    return out;
}

}  // namespace codite::solvers
