#include "codite/kernels.hpp"

#include "codite/simd.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace codite::kernels {

namespace {

bool needs_bandwidth(Family family) { return family != Family::linear; }

void check_finite(const Matrix& points, const char* label) {
    if (!points.allFinite()) {
        throw ArgumentError(std::string("kernels: ") + label + " contains NaN or Inf");
    }
}

}  // namespace

void validate(const KernelSpec& spec) {
    if (needs_bandwidth(spec.family) &&
        !(std::isfinite(spec.bandwidth) && spec.bandwidth > 0.0)) {
        throw ArgumentError("kernels: bandwidth must be positive and finite, got " +
                            std::to_string(spec.bandwidth));
    }
}

std::string family_name(Family family) {
    switch (family) {
        case Family::gaussian: return "gaussian";
        case Family::laplacian: return "laplacian";
        case Family::linear: return "linear";
    }
    return "unknown";
}

Family family_from_name(const std::string& name) {
    if (name == "gaussian") return Family::gaussian;
    if (name == "laplacian") return Family::laplacian;
    if (name == "linear") return Family::linear;
    throw ArgumentError("kernels: unknown kernel family '" + name + "'");
}

double eval_kernel(const KernelSpec& spec, const Vector& a, const Vector& b) {
    validate(spec);
    if (a.size() != b.size()) {
        throw ArgumentError("kernels: dimension mismatch, " + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()));
    }
    if (!a.allFinite() || !b.allFinite()) {
        throw ArgumentError("kernels: points contain NaN or Inf");
    }
    // Route through the scalar row kernels so single evaluations and Gram
    // entries are bit-identical.
    const auto& rows = simd::rows_scalar();
    double out = 0.0;
    const auto d = static_cast<std::int64_t>(a.size());
    switch (spec.family) {
        case Family::gaussian:
            rows.gaussian_row(a.data(), 1, 1, d, b.data(), 1.0 / (spec.bandwidth * spec.bandwidth), &out);
            break;
        case Family::laplacian:
            rows.laplacian_row(a.data(), 1, 1, d, b.data(), 1.0 / (spec.bandwidth * spec.bandwidth), &out);
            break;
        case Family::linear:
            rows.linear_row(a.data(), 1, 1, d, b.data(), &out);
            break;
    }
    return out;
}

void kernel_column(const KernelSpec& spec, const Matrix& A, const double* q, double* out) {
    const auto& rows = simd::rows();
    const auto m = static_cast<std::int64_t>(A.rows());
    const auto d = static_cast<std::int64_t>(A.cols());
    const auto stride = static_cast<std::int64_t>(A.outerStride());
    switch (spec.family) {
        case Family::gaussian:
            rows.gaussian_row(A.data(), m, stride, d, q, 1.0 / (spec.bandwidth * spec.bandwidth), out);
            break;
        case Family::laplacian:
            rows.laplacian_row(A.data(), m, stride, d, q, 1.0 / (spec.bandwidth * spec.bandwidth), out);
            break;
        case Family::linear:
            rows.linear_row(A.data(), m, stride, d, q, out);
            break;
    }
}

Matrix gram_values(const KernelSpec& spec, const Matrix& A, const Matrix& B) {
    validate(spec);
    if (A.cols() != B.cols()) {
        throw ArgumentError("kernels: gram dimension mismatch, " + std::to_string(A.cols()) +
                            " vs " + std::to_string(B.cols()));
    }
    if (A.rows() == 0 || B.rows() == 0) {
        throw ArgumentError("kernels: gram requires non-empty point sets");
    }
    check_finite(A, "left points");
    check_finite(B, "right points");

    const auto n = A.rows();
    const auto m = B.rows();
    const auto d = B.cols();
    Matrix values(n, m);
    parallel_for(m, [&](std::int64_t begin, std::int64_t end) {
        std::vector<double> q(static_cast<std::size_t>(d));
        for (std::int64_t j = begin; j < end; ++j) {
            for (Eigen::Index c = 0; c < d; ++c) q[static_cast<std::size_t>(c)] = B(j, c);
            kernel_column(spec, A, q.data(), values.col(j).data());
        }
    });
    return values;
}

GramMatrix gram(const KernelSpec& spec, const Matrix& A, const Matrix& B,
                std::string rows_from, std::string cols_from) {
    return GramMatrix{gram_values(spec, A, B), std::move(rows_from), std::move(cols_from)};
}

double median_heuristic(const Matrix& points) {
    const auto n = points.rows();
    if (n < 2) {
        throw ArgumentError("kernels: median heuristic needs at least 2 points, got " +
                            std::to_string(n));
    }
    check_finite(points, "points");
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            dists.push_back((points.row(i) - points.row(j)).norm());
        }
    }
    const std::size_t mid = dists.size() / 2;
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
    double median = dists[mid];
    if (dists.size() % 2 == 0) {
        const double below = *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (below + median);
    }
    if (median <= 0.0) {
        throw DegenerateInputError("kernels: all points identical, median distance is 0");
    }
    return median;
}

}  // namespace codite::kernels
