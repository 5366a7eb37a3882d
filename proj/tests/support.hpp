#pragma once

// Shared helpers for the unit and acceptance suites.

#include "codite/common.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace testsupport {

using codite::Matrix;
using codite::Rng;
using codite::Vector;

inline Matrix random_matrix(Rng& rng, Eigen::Index n, Eigen::Index d, double lo = -1.0,
                            double hi = 1.0) {
    Matrix m(n, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < n; ++i) m(i, j) = lo + (hi - lo) * rng.uniform();
    return m;
}

inline Vector random_vector(Rng& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = lo + (hi - lo) * rng.uniform();
    return v;
}

// Random symmetric positive definite matrix with eigenvalues in [eig_lo, eig_hi].
inline Matrix random_spd(Rng& rng, Eigen::Index n, double eig_lo = 0.1, double eig_hi = 2.0) {
    Matrix a = random_matrix(rng, n, n);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ();
    Vector eigs(n);
    for (Eigen::Index i = 0; i < n; ++i) eigs(i) = eig_lo + (eig_hi - eig_lo) * rng.uniform();
    return q * eigs.asDiagonal() * q.transpose();
}

// Distance in representable doubles; 0 means bit-identical.
inline std::uint64_t ulp_diff(double a, double b) {
    if (a == b) return 0;
    if (std::isnan(a) || std::isnan(b)) return ~std::uint64_t{0};
    auto to_ordered = [](double x) {
        auto bits = std::bit_cast<std::int64_t>(x);
        return bits < 0 ? std::numeric_limits<std::int64_t>::min() - bits : bits;
    };
    const std::int64_t ia = to_ordered(a);
    const std::int64_t ib = to_ordered(b);
    return static_cast<std::uint64_t>(ia > ib ? ia - ib : ib - ia);
}

inline std::vector<double> ranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> out(values.size());
    for (std::size_t pos = 0; pos < order.size();) {
        std::size_t tie_end = pos + 1;
        while (tie_end < order.size() && values[order[tie_end]] == values[order[pos]]) ++tie_end;
        const double mean_rank = 0.5 * (static_cast<double>(pos) + static_cast<double>(tie_end - 1));
        for (std::size_t k = pos; k < tie_end; ++k) out[order[k]] = mean_rank;
        pos = tie_end;
    }
    return out;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace testsupport
