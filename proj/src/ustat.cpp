#include "codite/ustat.hpp"

#include "codite/solvers.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <utility>

namespace codite::ustat {

namespace {

std::atomic<std::uint64_t> g_variance_clamps{0};

double binomial(Eigen::Index n, int r) {
    double result = 1.0;
    for (int t = 0; t < r; ++t) {
        result *= static_cast<double>(n - t) / static_cast<double>(t + 1);
    }
    return result;
}

double clamp_variance(double value) {
    if (value < 0.0) {
        g_variance_clamps.fetch_add(1, std::memory_order_relaxed);
        return 0.0;
    }
    return value;
}

Eigen::Index checked_power(Eigen::Index n, int r) {
    Eigen::Index total = 1;
    for (int t = 0; t < r; ++t) {
        if (total > (1 << 30) / n) {
            throw ArgumentError("tuple space n^r is too large to materialize");
        }
        total *= n;
    }
    return total;
}

}  // namespace

// ----------------------------------------------------------------------------
// Kernels
// ----------------------------------------------------------------------------

UStatKernel::UStatKernel(std::string name, int arity, std::function<double(const double*)> fn)
    : name_(std::move(name)), arity_(arity), fn_(std::move(fn)) {}

UStatKernel UStatKernel::mean() {
    return {"mean", 1, [](const double* y) { return y[0]; }};
}

UStatKernel UStatKernel::variance() {
    return {"variance", 2, [](const double* y) { return 0.5 * (y[0] - y[1]) * (y[0] - y[1]); }};
}

UStatKernel UStatKernel::gini() {
    return {"gini", 2, [](const double* y) { return std::abs(y[0] - y[1]); }};
}

UStatKernel UStatKernel::cdf_at(double y_star) {
    if (!std::isfinite(y_star)) throw ArgumentError("cdf_at: threshold must be finite");
    return {"cdf_at(" + format_double(y_star) + ")", 1,
            [y_star](const double* y) { return y[0] <= y_star ? 1.0 : 0.0; }};
}

UStatKernel UStatKernel::raw_moment(int k) {
    if (k < 1) throw ArgumentError("raw_moment: order must be >= 1, got " + std::to_string(k));
    return {"raw_moment(" + std::to_string(k) + ")", 1,
            [k](const double* y) { return std::pow(y[0], k); }};
}

UStatKernel UStatKernel::custom(std::string name, int arity,
                                std::function<double(const double*)> fn) {
    if (name.empty()) throw ArgumentError("custom u-kernel needs a name");
    if (arity < 1) throw ArgumentError("custom u-kernel arity must be >= 1");
    if (!fn) throw ArgumentError("custom u-kernel needs a callable");
    return {std::move(name), arity, std::move(fn)};
}

double UStatKernel::eval(const std::vector<double>& ys) const {
    if (static_cast<int>(ys.size()) != arity_) {
        throw ArgumentError("u-kernel '" + name_ + "' expects " + std::to_string(arity_) +
                            " outcomes, got " + std::to_string(ys.size()));
    }
    return fn_(ys.data());
}

double UStatKernel::eval1(double y) const {
    if (arity_ != 1) {
        throw ArgumentError("u-kernel '" + name_ + "' has arity " + std::to_string(arity_));
    }
    return fn_(&y);
}

double UStatKernel::eval2(double y1, double y2) const {
    if (arity_ != 2) {
        throw ArgumentError("u-kernel '" + name_ + "' has arity " + std::to_string(arity_));
    }
    const double ys[2] = {y1, y2};
    return fn_(ys);
}

// ----------------------------------------------------------------------------
// Fitting
// ----------------------------------------------------------------------------

UStatModel fit_ustat_regression(const Matrix& X, const Vector& Y, const UStatKernel& h,
                                const kernels::KernelSpec& k_spec, double lambda) {
    kernels::validate(k_spec);
    if (X.rows() != Y.size()) {
        throw ArgumentError("fit_ustat_regression: covariates and outcomes disagree on length");
    }
    const Eigen::Index n = X.rows();
    const int r = h.arity();
    if (n < r) {
        throw ArgumentError("fit_ustat_regression needs at least arity-many samples (" +
                            std::to_string(r) + "), got " + std::to_string(n));
    }
    if (!(lambda > 0.0)) throw ArgumentError("fit_ustat_regression: lambda must be positive");
    if (!Y.allFinite()) throw DataError("fit_ustat_regression: outcomes contain NaN or Inf");

    const Matrix K = kernels::gram_values(k_spec, X, X);
    const double ridge = binomial(n, r) * lambda;

    Vector coefficients;
    if (r == 1) {
        Vector rhs(n);
        for (Eigen::Index i = 0; i < n; ++i) rhs(i) = h.eval1(Y(i));
        coefficients = solvers::spd_solve(K, ridge, rhs);
    } else if (r == 2) {
        Matrix H(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) H(i, j) = h.eval2(Y(i), Y(j));
        }
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const RowMajor H_rm = H;
        const Eigen::Map<const Vector> rhs(H_rm.data(), n * n);
        coefficients = solvers::kron_ridge_solve(K, ridge, rhs, 2);
    } else {
        const Eigen::Index total = checked_power(n, r);
        Vector rhs(total);
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(r), 0);
        std::vector<double> ys(static_cast<std::size_t>(r), 0.0);
        for (Eigen::Index flat = 0; flat < total; ++flat) {
            for (int t = 0; t < r; ++t) ys[static_cast<std::size_t>(t)] = Y(idx[static_cast<std::size_t>(t)]);
            rhs(flat) = h.eval(ys);
            // Lexicographic odometer, last slot fastest.
            for (int t = r - 1; t >= 0; --t) {
                if (++idx[static_cast<std::size_t>(t)] < n) break;
                idx[static_cast<std::size_t>(t)] = 0;
            }
        }
        coefficients = solvers::kron_ridge_solve(K, ridge, rhs, r);
    }

    return UStatModel{h, k_spec, X, lambda, std::move(coefficients)};
}

// ----------------------------------------------------------------------------
// Prediction
// ----------------------------------------------------------------------------

namespace {

Vector kernel_vector(const kernels::KernelSpec& spec, const Matrix& X, const Vector& x) {
    if (x.size() != X.cols()) {
        throw ArgumentError("query dimension " + std::to_string(x.size()) +
                            " does not match training dimension " + std::to_string(X.cols()));
    }
    Matrix q(1, x.size());
    q.row(0) = x.transpose();
    return kernels::gram_values(spec, X, q).col(0);
}

}  // namespace

double UStatModel::predict(const std::vector<Vector>& xs) const {
    const int r = arity();
    if (static_cast<int>(xs.size()) != r) {
        throw ArgumentError("predict expects " + std::to_string(r) + " covariate points, got " +
                            std::to_string(xs.size()));
    }
    const Eigen::Index n_train = n();
    if (r == 1) {
        return kernel_vector(k_spec, X_train, xs[0]).dot(coefficients);
    }
    if (r == 2) {
        const Vector v1 = kernel_vector(k_spec, X_train, xs[0]);
        const Vector v2 = kernel_vector(k_spec, X_train, xs[1]);
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const Eigen::Map<const RowMajor> C(coefficients.data(), n_train, n_train);
        return v1.dot(C * v2);
    }
    // General contraction, last slot fastest-varying.
    Vector current = coefficients;
    for (int t = r - 1; t >= 1; --t) {
        const Vector v = kernel_vector(k_spec, X_train, xs[static_cast<std::size_t>(t)]);
        const Eigen::Index rows = current.size() / n_train;
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const Eigen::Map<const RowMajor> view(current.data(), rows, n_train);
        current = view * v;
    }
    return kernel_vector(k_spec, X_train, xs[0]).dot(current);
}

double UStatModel::predict_diag(const Vector& x) const {
    return predict(std::vector<Vector>(static_cast<std::size_t>(arity()), x));
}

double conditional_std(const UStatModel& variance_model, const Vector& x) {
    if (variance_model.h.name() != "variance" || variance_model.arity() != 2) {
        throw ArgumentError("conditional_std requires a variance-kernel model, got '" +
                            variance_model.h.name() + "'");
    }
    return std::sqrt(clamp_variance(variance_model.predict_diag(x)));
}

std::uint64_t variance_clamp_count() { return g_variance_clamps.load(std::memory_order_relaxed); }

void reset_variance_clamp_count() { g_variance_clamps.store(0, std::memory_order_relaxed); }

// ----------------------------------------------------------------------------
// Nadaraya–Watson baseline
// ----------------------------------------------------------------------------

std::optional<double> nw_conditional_ustat(const Matrix& X, const Vector& Y, const UStatKernel& h,
                                           double bandwidth, const std::vector<Vector>& x_tuple) {
    const int r = h.arity();
    if (static_cast<int>(x_tuple.size()) != r) {
        throw ArgumentError("nw_conditional_ustat expects " + std::to_string(r) +
                            " covariate points, got " + std::to_string(x_tuple.size()));
    }
    if (!(bandwidth > 0.0)) throw ArgumentError("nw_conditional_ustat: bandwidth must be positive");
    if (X.rows() != Y.size()) {
        throw ArgumentError("nw_conditional_ustat: covariates and outcomes disagree on length");
    }
    const Eigen::Index n = X.rows();
    if (n < r) throw ArgumentError("nw_conditional_ustat needs at least arity-many samples");

    // w(i, t) = exp(-‖Xᵢ - x_t‖² / (2a²)).
    Matrix w(n, r);
    const double inv_two_a_sq = 1.0 / (2.0 * bandwidth * bandwidth);
    for (int t = 0; t < r; ++t) {
        const Vector& xt = x_tuple[static_cast<std::size_t>(t)];
        if (xt.size() != X.cols()) {
            throw ArgumentError("nw_conditional_ustat: query dimension mismatch");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            w(i, t) = std::exp(-(X.row(i).transpose() - xt).squaredNorm() * inv_two_a_sq);
        }
    }

    double numerator = 0.0;
    double denominator = 0.0;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(r), 0);
    std::vector<double> ys(static_cast<std::size_t>(r), 0.0);
    const Eigen::Index total = checked_power(n, r);
    for (Eigen::Index flat = 0; flat < total; ++flat) {
        bool distinct = true;
        for (int a = 0; a < r && distinct; ++a) {
            for (int b = a + 1; b < r; ++b) {
                if (idx[static_cast<std::size_t>(a)] == idx[static_cast<std::size_t>(b)]) {
                    distinct = false;
                    break;
                }
            }
        }
        if (distinct) {
            double weight = 1.0;
            for (int t = 0; t < r; ++t) {
                weight *= w(idx[static_cast<std::size_t>(t)], t);
                ys[static_cast<std::size_t>(t)] = Y(idx[static_cast<std::size_t>(t)]);
            }
            numerator += weight * h.eval(ys);
            denominator += weight;
        }
        for (int t = r - 1; t >= 0; --t) {
            if (++idx[static_cast<std::size_t>(t)] < n) break;
            idx[static_cast<std::size_t>(t)] = 0;
        }
    }

    if (denominator < 1e-12) return std::nullopt;
    return numerator / denominator;
}

double nw_default_bandwidth(const Matrix& X) {
    const double base = kernels::median_heuristic(X);
    const double n = static_cast<double>(X.rows());
    const double d = static_cast<double>(X.cols());
    return base * std::pow(n, -1.0 / (4.0 + d));
}

// ----------------------------------------------------------------------------
// Standardized mean difference components
// ----------------------------------------------------------------------------

CateComponents standardized_cate_components(const data::Dataset& dataset,
                                            const kernels::KernelSpec& k_spec, double lambda0,
                                            double lambda1, const Vector& x) {
    dataset.validate(/*require_both_classes=*/true);

    CateComponents out;
    for (const int group : {0, 1}) {
        const Matrix Xg = dataset.group_X(group);
        const Vector Yg = dataset.group_y(group);
        const double lambda = group == 0 ? lambda0 : lambda1;
        const UStatModel mean_model =
            fit_ustat_regression(Xg, Yg, UStatKernel::mean(), k_spec, lambda);
        const UStatModel var_model =
            fit_ustat_regression(Xg, Yg, UStatKernel::variance(), k_spec, lambda);
        const double mean = mean_model.predict_diag(x);
        const double var = clamp_variance(var_model.predict_diag(x));
        if (group == 0) {
            out.mean0 = mean;
            out.var0 = var;
        } else {
            out.mean1 = mean;
            out.var1 = var;
        }
    }
    return out;
}

double standardized_cate(const CateComponents& components) {
    const double pooled = components.var0 + components.var1;
    if (!(pooled > 0.0)) {
        throw NumericError("standardized_cate: combined conditional variance is zero");
    }
    return (components.mean1 - components.mean0) / std::sqrt(pooled);
}

// ----------------------------------------------------------------------------
// Curve export
// ----------------------------------------------------------------------------

std::string curves_to_csv(const std::vector<UStatCurve>& curves) {
    std::ostringstream out;
    out << "x,estimate,group,quantity\n";
    for (const UStatCurve& curve : curves) {
        if (curve.x_grid.size() != curve.estimates.size()) {
            throw ArgumentError("curve '" + curve.quantity + "' grid and estimates disagree");
        }
        for (Eigen::Index i = 0; i < curve.x_grid.size(); ++i) {
            out << format_double(curve.x_grid(i)) << ',' << format_double(curve.estimates(i))
                << ',' << curve.group << ',' << curve.quantity << '\n';
        }
    }
    return out.str();
}

}  // namespace codite::ustat
