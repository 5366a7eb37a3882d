#include "codite/solvers.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace codite;
using namespace codite::solvers;
using testsupport::random_matrix;
using testsupport::random_spd;
using testsupport::random_vector;

namespace reference {

// Dense materialization of the r-fold Kronecker power with lexicographic
// flattening, solved by an unrelated factorization (partial-pivot LU).
Matrix kron_power(const Matrix& K, int r) {
    Matrix power = K;
    for (int t = 1; t < r; ++t) {
        Matrix next(power.rows() * K.rows(), power.cols() * K.cols());
        for (Eigen::Index i = 0; i < power.rows(); ++i)
            for (Eigen::Index j = 0; j < power.cols(); ++j)
                next.block(i * K.rows(), j * K.cols(), K.rows(), K.cols()) = power(i, j) * K;
        power = next;
    }
    return power;
}

Vector dense_kron_solve(const Matrix& K, double ridge, const Vector& rhs, int r) {
    Matrix system = kron_power(K, r);
    system.diagonal().array() += ridge;
    return Eigen::PartialPivLU<Matrix>(system).solve(rhs);
}

}  // namespace reference

TEST_SUITE_BEGIN("solvers");

TEST_CASE("spd_solve hand-checked values") {
    // M = I, ridge 1, B = I -> 0.5 I.
    Matrix b = Matrix::Identity(2, 2);
    Matrix x = spd_solve(Matrix::Identity(2, 2), 1.0, b);
    CHECK(x.isApprox(0.5 * Matrix::Identity(2, 2), 1e-14));

    // [[2,1],[1,2]] x = (1,1): hand inverse gives (1/3, 1/3).
    Matrix m(2, 2);
    m << 2.0, 1.0, 1.0, 2.0;
    Vector rhs(2);
    rhs << 1.0, 1.0;
    Vector sol = spd_solve(m, 0.0, rhs);
    CHECK(sol(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(sol(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("spd_solve residual and recovery on random SPD systems") {
    Rng rng(29);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix m = random_spd(rng, 8);
        const double ridge = 0.1 * rng.uniform();
        Matrix shifted = m;
        shifted.diagonal().array() += ridge;

        const Matrix b = random_matrix(rng, 8, 3);
        const Matrix x = spd_solve(m, ridge, b);
        CHECK((shifted * x - b).norm() <= 1e-8 * b.norm());

        const Matrix x0 = random_matrix(rng, 8, 2);
        const Matrix shifted_x0 = shifted * x0;
        const Matrix recovered = spd_solve(m, ridge, shifted_x0);
        CHECK((recovered - x0).norm() <= 1e-8 * x0.norm());
    }
}

TEST_CASE("SpdFactor reconstructs M + ridge I through its solves") {
    Rng rng(31);
    const Matrix m = random_spd(rng, 6);
    const SpdFactor factor(m, 0.25);
    // Solving against I applies the inverse; undoing it must reproduce M + ridge I.
    Matrix shifted = m;
    shifted.diagonal().array() += 0.25;
    const Matrix identity = Matrix::Identity(6, 6);
    const Matrix inv_applied = factor.solve(identity);
    CHECK((shifted * inv_applied - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("spd_solve rejects bad inputs and names the failing pivot") {
    Matrix rect(2, 3);
    rect.setZero();
    CHECK_THROWS_AS(SpdFactor(rect, 0.0), ArgumentError);

    Matrix asym(2, 2);
    asym << 1.0, 2.0, 0.0, 1.0;
    CHECK_THROWS_AS(SpdFactor(asym, 0.0), ArgumentError);

    Matrix indefinite(2, 2);
    indefinite << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
    CHECK_THROWS_WITH_AS(SpdFactor(indefinite, 0.0),
                         doctest::Contains("pivot"), NumericError);

    CHECK_THROWS_AS(SpdFactor(Matrix::Identity(2, 2), -1.0), ArgumentError);
}

TEST_CASE("sym_eigen hand-checked spectra") {
    Matrix diag = Vector{{3.0, 1.0}}.asDiagonal();
    const EigenSym e = sym_eigen(diag);
    CHECK(e.values(0) == doctest::Approx(1.0));
    CHECK(e.values(1) == doctest::Approx(3.0));
    CHECK(std::fabs(e.vectors.col(0)(1)) == doctest::Approx(1.0));  // axis vectors
    CHECK(std::fabs(e.vectors.col(1)(0)) == doctest::Approx(1.0));

    Matrix flip(2, 2);
    flip << 0.0, 1.0, 1.0, 0.0;
    const EigenSym f = sym_eigen(flip);
    CHECK(f.values(0) == doctest::Approx(-1.0));
    CHECK(f.values(1) == doctest::Approx(1.0));
}

TEST_CASE("sym_eigen reconstruction and orthonormality on random symmetric input") {
    Rng rng(37);
    Matrix a = random_matrix(rng, 10, 10);
    Matrix m = 0.5 * (a + a.transpose());
    const EigenSym e = sym_eigen(m);
    const Matrix rebuilt = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK((rebuilt - m).norm() <= 1e-9 * std::max(1.0, m.norm()));
    CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() <=
          1e-10);
    for (Eigen::Index i = 1; i < e.values.size(); ++i) CHECK(e.values(i - 1) <= e.values(i));

    Matrix bad = m;
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(sym_eigen(bad), ArgumentError);
}

TEST_CASE("eigen-based and Cholesky-based ridge solves agree") {
    Rng rng(41);
    const Matrix m = random_spd(rng, 12, 0.0, 1.5);
    const double ridge = 0.3;
    const Vector b = random_vector(rng, 12);
    const Vector via_chol = spd_solve(m, ridge, b);
    const EigenSym e = sym_eigen(m);
    const Vector via_eig =
        e.vectors * ((e.vectors.transpose() * b).array() / (e.values.array() + ridge)).matrix();
    CHECK((via_chol - via_eig).norm() <= 1e-8 * b.norm());
}

TEST_CASE("kron_ridge_solve identity Gram shortcut") {
    Rng rng(43);
    const Vector rhs = random_vector(rng, 16);
    const Vector c = kron_ridge_solve(Matrix::Identity(4, 4), 0.7, rhs, 2);
    CHECK((c - rhs / 1.7).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("kron_ridge_solve matches the dense materialized system") {
    Rng rng(47);
    for (const Eigen::Index n : {2, 3, 4, 5, 6}) {
        const Matrix k = random_spd(rng, n, 0.05, 2.0);
        const Vector rhs = random_vector(rng, n * n);
        const double ridge = 0.2 + rng.uniform();
        const Vector fast = kron_ridge_solve(k, ridge, rhs, 2);
        const Vector dense = reference::dense_kron_solve(k, ridge, rhs, 2);
        CHECK((fast - dense).norm() <= 1e-8 * std::max(1.0, dense.norm()));

        // Residual of the full n^2 system via implicit products.
        Matrix kron = reference::kron_power(k, 2);
        kron.diagonal().array() += ridge;
        CHECK((kron * fast - rhs).norm() <= 1e-8 * rhs.norm());
    }
}

TEST_CASE("kron_ridge_solve keeps symmetric right-hand sides symmetric") {
    Rng rng(53);
    const Eigen::Index n = 5;
    const Matrix k = random_spd(rng, n);
    const Matrix half = random_matrix(rng, n, n);
    const Matrix r = 0.5 * (half + half.transpose());
    Vector rhs(n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) rhs(i * n + j) = r(i, j);
    const Vector c = kron_ridge_solve(k, 0.4, rhs, 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            CHECK(c(i * n + j) == doctest::Approx(c(j * n + i)).epsilon(1e-10));
}

TEST_CASE("kron_ridge_solve dense fallback for arity 3") {
    Rng rng(59);
    const Eigen::Index n = 4;
    const Matrix k = random_spd(rng, n, 0.2, 1.0);
    const Vector rhs = random_vector(rng, n * n * n);
    const Vector fast = kron_ridge_solve(k, 0.9, rhs, 3);
    const Vector dense = reference::dense_kron_solve(k, 0.9, rhs, 3);
    CHECK((fast - dense).norm() <= 1e-8 * std::max(1.0, dense.norm()));

    // Size guard: 17^3 = 4913 > 4096.
    const Matrix big = Matrix::Identity(17, 17);
    const Vector big_rhs = Vector::Zero(17 * 17 * 17);
    CHECK_THROWS_AS(kron_ridge_solve(big, 1.0, big_rhs, 3), ArgumentError);
}

TEST_CASE("kron_ridge_solve argument validation") {
    const Matrix k = Matrix::Identity(3, 3);
    const Vector rhs = Vector::Zero(9);
    CHECK_THROWS_AS(kron_ridge_solve(k, 0.0, rhs, 2), ArgumentError);
    CHECK_THROWS_AS(kron_ridge_solve(k, -0.5, rhs, 2), ArgumentError);
    CHECK_THROWS_AS(kron_ridge_solve(k, 1.0, Vector::Zero(8), 2), ArgumentError);
    CHECK_THROWS_AS(kron_ridge_solve(k, 1.0, rhs, 0), ArgumentError);
}

TEST_CASE("effective_ridge applies the trace floor") {
    CHECK(effective_ridge(0.5, 100.0) == 0.5);
    CHECK(effective_ridge(0.0, 100.0) == doctest::Approx(1e-8));
    CHECK(effective_ridge(1e-20, 1e4) == doctest::Approx(1e-6));
}

TEST_SUITE_END();
