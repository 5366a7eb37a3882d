#pragma once

// ============================================================================
// kcd: the kernel conditional-discrepancy permutation test.
//
// The statistic t̂ averages the squared embedding distance Û²(xᵢ) over all
// pooled covariates; the null is simulated by redrawing treatment labels
// z̃ᵢ ~ Bernoulli(ê(xᵢ)) with propensities held fixed across permutations.
// ============================================================================

#include "codite/common.hpp"
#include "codite/data.hpp"
#include "codite/kernels.hpp"

#include <cstdint>
#include <string>

namespace codite::kcd {

// ----------------------------------------------------------------------------
// Kernel logistic regression (dual form) for the propensity e(x) = P(Z=1|X=x).
// ----------------------------------------------------------------------------

struct PropensityModel {
    kernels::KernelSpec k_spec;
    Matrix X_train;
    Vector dual_weights;    // β in f(x) = Σᵢ βᵢ k(xᵢ, x) + b
    double intercept = 0.0;
    double ridge = 1.0;
    double clip_eps = 0.01;
    bool converged = false;
    int iterations = 0;

    // σ(f(x)) clipped to [clip_eps, 1 - clip_eps].
    double predict_one(const Vector& x) const;
    Vector predict(const Matrix& Xq) const;
};

// Penalized IRLS fit: NLL(z | σ(Kβ + b)) + (ridge/2)·βᵀKβ, intercept
// unpenalized, steps damped to never increase the objective.
PropensityModel fit_propensity_klr(const Matrix& X, const IntVector& z,
                                   const kernels::KernelSpec& k_spec, double ridge = 1.0,
                                   int max_iter = 100, double tol = 1e-9,
                                   double clip_eps = 0.01);

// ----------------------------------------------------------------------------
// Test configuration and result
// ----------------------------------------------------------------------------

struct PropensitySpec {
    enum class Mode { klr, known, constant } mode = Mode::klr;
    double constant_p = 0.5;  // constant mode
    Vector known_values;      // known mode, one value per unit
    double klr_ridge = 1.0;   // klr mode
    double clip_eps = 0.01;

    static PropensitySpec klr(double ridge = 1.0, double clip = 0.01);
    static PropensitySpec known(Vector values, double clip = 0.01);
    static PropensitySpec constant(double p);
};

std::string propensity_mode_name(PropensitySpec::Mode mode);

struct KcdOptions {
    kernels::KernelSpec k_spec;  // covariate kernel (shared by both groups)
    kernels::KernelSpec l_spec;  // outcome kernel
    double lambda0 = 0.0;        // regularization scale, group 0; > 0
    double lambda1 = 0.0;
    int permutations = 100;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    PropensitySpec propensity;
    int max_redraws = 100;  // single-class permutation redraw budget
};

struct KcdTestResult {
    double t_hat = 0.0;
    Vector null_stats;  // permutation statistics, one per permutation
    double p_value = 1.0;
    double alpha = 0.05;
    bool rejected = false;
    int m = 0;
    std::uint64_t seed = 0;
    std::string propensity_mode;
    Vector propensities;  // e(xᵢ) used for label redraws
};

// Monte-Carlo p with the add-one correction; strict exceedance.
double p_value_from(double t_hat, const Vector& null_stats);

// t̂ alone, on the dataset's own labels.
double kcd_statistic(const data::Dataset& dataset, const kernels::KernelSpec& k_spec,
                     const kernels::KernelSpec& l_spec, double lambda0, double lambda1);

KcdTestResult kcd_test(const data::Dataset& dataset, const KcdOptions& options);

std::string result_to_json(const KcdTestResult& result);

}  // namespace codite::kcd
