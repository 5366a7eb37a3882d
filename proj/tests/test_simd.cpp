#include "codite/simd.hpp"

#include "codite/kernels.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

using namespace codite;
using testsupport::random_matrix;
using testsupport::ulp_diff;

TEST_SUITE_BEGIN("simd");

TEST_CASE("exp_core tracks std::exp within 4 ulp") {
    Rng rng(23);
    std::uint64_t worst = 0;
    for (int i = 0; i < 20000; ++i) {
        const double x = -700.0 + 1400.0 * rng.uniform();
        worst = std::max(worst, ulp_diff(simd::exp_core(x), std::exp(x)));
    }
    // Dense sweep through the kernels' actual domain (non-positive arguments).
    for (int i = 0; i <= 100000; ++i) {
        const double x = -705.0 * static_cast<double>(i) / 100000.0;
        worst = std::max(worst, ulp_diff(simd::exp_core(x), std::exp(x)));
    }
    CHECK(worst <= 4);
}

TEST_CASE("exp_core edge behaviour") {
    CHECK(simd::exp_core(0.0) == 1.0);
    CHECK(simd::exp_core(-800.0) == 0.0);
    CHECK(simd::exp_core(710.0) == std::numeric_limits<double>::infinity());
    CHECK(std::isnan(simd::exp_core(std::nan(""))));
}

namespace {

void check_rows_bitwise_equal(const simd::RowKernels& lhs, const simd::RowKernels& rhs) {
    Rng rng(101);
    for (const std::int64_t m : {1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 64, 255}) {
        for (const std::int64_t d : {1, 2, 3, 25}) {
            const Matrix x = random_matrix(rng, m, d, -2.0, 2.0);
            const Vector q = testsupport::random_vector(rng, d, -2.0, 2.0);
            std::vector<double> a(static_cast<std::size_t>(m)), b(static_cast<std::size_t>(m));
            const double inv = 1.0 / 0.49;

            lhs.gaussian_row(x.data(), m, x.rows(), d, q.data(), inv, a.data());
            rhs.gaussian_row(x.data(), m, x.rows(), d, q.data(), inv, b.data());
            for (std::int64_t i = 0; i < m; ++i) CHECK(a[i] == b[i]);

            lhs.laplacian_row(x.data(), m, x.rows(), d, q.data(), inv, a.data());
            rhs.laplacian_row(x.data(), m, x.rows(), d, q.data(), inv, b.data());
            for (std::int64_t i = 0; i < m; ++i) CHECK(a[i] == b[i]);

            lhs.linear_row(x.data(), m, x.rows(), d, q.data(), a.data());
            rhs.linear_row(x.data(), m, x.rows(), d, q.data(), b.data());
            for (std::int64_t i = 0; i < m; ++i) CHECK(a[i] == b[i]);
        }
    }
}

}  // namespace

TEST_CASE("active row kernels are bit-identical to the scalar reference") {
    INFO("active ISA: " << simd::isa_name(simd::active_isa()));
    check_rows_bitwise_equal(simd::rows(), simd::rows_scalar());
}

TEST_CASE("every available ISA variant matches the scalar reference") {
    for (const auto isa : {simd::Isa::avx2, simd::Isa::neon}) {
        try {
            const auto& rows = simd::rows_for(isa);
            INFO("checking ISA: " << simd::isa_name(isa));
            check_rows_bitwise_equal(rows, simd::rows_scalar());
        } catch (const ArgumentError&) {
            // Variant not available on this CPU; nothing to compare.
        }
    }
}

TEST_CASE("force_isa overrides dispatch and validates availability") {
    const auto original = simd::active_isa();
    simd::force_isa(simd::Isa::scalar);
    CHECK(simd::active_isa() == simd::Isa::scalar);
    simd::reset_isa();
    CHECK(simd::active_isa() == original);
#if !defined(__aarch64__)
    CHECK_THROWS_AS(simd::force_isa(simd::Isa::neon), ArgumentError);
#endif
}

TEST_CASE("gram is bit-identical across ISA choices and thread counts") {
    Rng rng(55);
    const Matrix a = random_matrix(rng, 37, 3, -1.0, 1.0);
    const Matrix b = random_matrix(rng, 29, 3, -1.0, 1.0);
    const kernels::KernelSpec spec{kernels::Family::gaussian, 0.9};

    const Matrix active = kernels::gram_values(spec, a, b);
    simd::force_isa(simd::Isa::scalar);
    const Matrix scalar = kernels::gram_values(spec, a, b);
    simd::reset_isa();
    for (Eigen::Index i = 0; i < active.rows(); ++i)
        for (Eigen::Index j = 0; j < active.cols(); ++j) CHECK(active(i, j) == scalar(i, j));

    setenv("CODITE_THREADS", "4", 1);
    const Matrix threaded = kernels::gram_values(spec, a, b);
    setenv("CODITE_THREADS", "1", 1);
    const Matrix serial = kernels::gram_values(spec, a, b);
    unsetenv("CODITE_THREADS");
    for (Eigen::Index i = 0; i < active.rows(); ++i)
        for (Eigen::Index j = 0; j < active.cols(); ++j) {
            CHECK(threaded(i, j) == serial(i, j));
            CHECK(threaded(i, j) == active(i, j));
        }
}

TEST_SUITE_END();
