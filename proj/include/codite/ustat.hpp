#pragma once

// ============================================================================
// ustat: regression of U-statistic kernels over tuples of covariates.
//
// For an arity-r kernel h the fitted surface is
//   F̂(x₁..x_r) = Σ_{i₁..i_r} c_{i₁..i_r} Π_t k(x_{i_t}, x_t)
// with (Π K + binom(n,r)·λ I) c = h over all n^r training tuples, flattened
// lexicographically (row-major).  Diagonal evaluation F̂(x,..,x) yields
// conditional variance/Gini/moment curves.
// ============================================================================

#include "codite/common.hpp"
#include "codite/data.hpp"
#include "codite/kernels.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace codite::ustat {

class UStatKernel {
public:
    static UStatKernel mean();                 // r=1, h(y) = y
    static UStatKernel variance();             // r=2, h = (y₁-y₂)²/2
    static UStatKernel gini();                 // r=2, h = |y₁-y₂|
    static UStatKernel cdf_at(double y_star);  // r=1, h = 1{y <= y*}
    static UStatKernel raw_moment(int k);      // r=1, h = y^k
    static UStatKernel custom(std::string name, int arity,
                              std::function<double(const double*)> fn);

    int arity() const { return arity_; }
    const std::string& name() const { return name_; }

    double eval(const std::vector<double>& ys) const;
    double eval1(double y) const;
    double eval2(double y1, double y2) const;

private:
    UStatKernel(std::string name, int arity, std::function<double(const double*)> fn);

    std::string name_;
    int arity_;
    std::function<double(const double*)> fn_;
};

struct UStatModel {
    UStatKernel h;
    kernels::KernelSpec k_spec;
    Matrix X_train;
    double lambda = 0.0;
    Vector coefficients;  // length n^arity, lexicographic row-major tuples

    Eigen::Index n() const { return X_train.rows(); }
    int arity() const { return h.arity(); }

    // F̂ at an ordered tuple of covariate points (one per kernel slot).
    double predict(const std::vector<Vector>& xs) const;

    // Diagonal F̂(x,..,x).
    double predict_diag(const Vector& x) const;
};

UStatModel fit_ustat_regression(const Matrix& X, const Vector& Y, const UStatKernel& h,
                                const kernels::KernelSpec& k_spec, double lambda);

// √max(0, F̂(x,x)) for a variance-kernel model; negative clamps are counted
// process-wide (see below).
double conditional_std(const UStatModel& variance_model, const Vector& x);

std::uint64_t variance_clamp_count();
void reset_variance_clamp_count();

// ----------------------------------------------------------------------------
// Locally-weighted (Nadaraya–Watson) baseline over distinct index tuples,
// with Gaussian density weights exp(-‖x - Xᵢ‖²/(2a²)).  Empty effective
// neighborhoods (denominator below 1e-12) yield nullopt.
// ----------------------------------------------------------------------------

std::optional<double> nw_conditional_ustat(const Matrix& X, const Vector& Y, const UStatKernel& h,
                                           double bandwidth, const std::vector<Vector>& x_tuple);

// Median-heuristic scale shrunk at the nonparametric rate n^{-1/(4+d)}.
double nw_default_bandwidth(const Matrix& X);

// ----------------------------------------------------------------------------
// Group-wise conditional moments for the standardized mean difference
// (μ₁(x) - μ₀(x)) / √(σ₀²(x) + σ₁²(x)).
// ----------------------------------------------------------------------------

struct CateComponents {
    double mean0 = 0.0;
    double mean1 = 0.0;
    double var0 = 0.0;  // clamped at zero
    double var1 = 0.0;
};

CateComponents standardized_cate_components(const data::Dataset& dataset,
                                            const kernels::KernelSpec& k_spec, double lambda0,
                                            double lambda1, const Vector& x);

double standardized_cate(const CateComponents& components);

// ----------------------------------------------------------------------------
// Curve export for plotting: header x,estimate,group,quantity.
// ----------------------------------------------------------------------------

struct UStatCurve {
    Vector x_grid;           // scalar covariate grid
    Vector estimates;
    std::string group;       // "control", "treatment", or "pooled"
    std::string quantity;    // e.g. "std", "variance", "gini"
};

std::string curves_to_csv(const std::vector<UStatCurve>& curves);

}  // namespace codite::ustat
