#pragma once

// ============================================================================
// cme: conditional mean embeddings per treatment group, the closed-form
// MMD distance between them, and conditional witness functions.
//
// A fitted model represents x ↦ Σᵢ αᵢ(x)·l(yᵢ,·) with
// α(x) = (K + ridge·I)⁻¹ 𝒌(x), applied through a Cholesky factor.
// ============================================================================

#include "codite/common.hpp"
#include "codite/kernels.hpp"
#include "codite/solvers.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace codite::cme {

enum class Group { control = 0, treatment = 1 };

std::string group_name(Group group);

// Default regularization scale; decays slower than n^{-1/2} as consistency
// requires.
inline double default_lambda(Eigen::Index n) { return std::pow(static_cast<double>(n), -0.25); }

class CmeModel {
public:
    // X: n x d covariates (rows are points), Y: n outcomes.
    static CmeModel fit(Matrix X, Vector Y, const kernels::KernelSpec& k_spec,
                        const kernels::KernelSpec& l_spec, double lambda,
                        Group group = Group::control);

    Group group() const { return group_; }
    const kernels::KernelSpec& k_spec() const { return k_spec_; }
    const kernels::KernelSpec& l_spec() const { return l_spec_; }
    const Matrix& X_train() const { return x_; }
    const Vector& Y_train() const { return y_; }
    double lambda() const { return lambda_; }
    double ridge() const { return factor_->ridge(); }
    Eigen::Index n() const { return x_.rows(); }
    const solvers::SpdFactor& gram_factor() const { return *factor_; }

    // Embedding weights α(x); x must have the training dimension.
    Vector alpha(const Vector& x) const;

    // Column q holds α(Xq.row(q)); batch form of alpha().
    Matrix alpha_batch(const Matrix& Xq) const;

    // Embedding evaluated at an outcome: μ̂_{Y|X=x}(y) = α(x)ᵀ l(Y_train, y).
    double mu(const Vector& x, double y) const;

private:
    CmeModel() = default;

    Group group_ = Group::control;
    kernels::KernelSpec k_spec_;
    kernels::KernelSpec l_spec_;
    Matrix x_;
    Vector y_;
    double lambda_ = 0.0;
    std::shared_ptr<const solvers::SpdFactor> factor_;
};

CmeModel fit_cme(Matrix X, Vector Y, const kernels::KernelSpec& k_spec,
                 const kernels::KernelSpec& l_spec, double lambda,
                 Group group = Group::control);

struct WitnessGrid {
    Matrix x_grid;   // one evaluation point per row
    Vector y_grid;   // outcome grid
    Matrix values;   // |x_grid| x |y_grid|, values(i, j) = witness(x_i, y_j)
};

// Serialization for plot consumption.  CSV header is
// x_index,y_index,<x columns>,y,value with the covariate columns named x for
// d=1 and x0..x{d-1} otherwise.
std::string witness_grid_to_csv(const WitnessGrid& grid);
std::string witness_grid_to_json(const WitnessGrid& grid);

// Pairs two fitted models (same outcome kernel) and caches the outcome Gram
// blocks so repeated per-x evaluation is cheap.
class CmePair {
public:
    CmePair(const CmeModel& m0, const CmeModel& m1);

    // Lemma-style quadratic form α₀ᵀL₀α₀ − 2α₀ᵀLα₁ + α₁ᵀL₁α₁; may be a hair
    // negative numerically.
    double mmd_sq(const Vector& x) const;

    // √max(0, mmd_sq): the MMD-CoDiTE estimate Û(x).
    double mmd(const Vector& x) const;

    double witness(const Vector& x, double y) const;

    WitnessGrid witness_grid(const Matrix& x_grid, const Vector& y_grid) const;

    // Batch of mmd_sq over rows of Xq (one factored solve per model).
    Vector mmd_sq_batch(const Matrix& Xq) const;

private:
    const CmeModel& m0_;
    const CmeModel& m1_;
    Matrix l00_, l11_, l01_;
};

// Single-shot conveniences (construct a CmePair internally).
double codite_mmd(const CmeModel& m0, const CmeModel& m1, const Vector& x);
double codite_mmd_sq(const CmeModel& m0, const CmeModel& m1, const Vector& x);
double witness(const CmeModel& m0, const CmeModel& m1, const Vector& x, double y);
WitnessGrid witness_grid(const CmeModel& m0, const CmeModel& m1, const Matrix& x_grid,
                         const Vector& y_grid);

struct LambdaSelection {
    double lambda = 0.0;
    std::vector<double> losses;  // mean held-out embedding loss per grid value
};

// K-fold cross-validation of λ by the held-out embedding loss
// ‖l(yⱼ,·) − μ̂(xⱼ)‖²_H, ties broken toward the larger λ.
LambdaSelection select_lambda_detailed(const Matrix& X, const Vector& Y,
                                       const kernels::KernelSpec& k_spec,
                                       const kernels::KernelSpec& l_spec,
                                       const std::vector<double>& grid, int folds);

double select_lambda(const Matrix& X, const Vector& Y, const kernels::KernelSpec& k_spec,
                     const kernels::KernelSpec& l_spec, const std::vector<double>& grid,
                     int folds);

}  // namespace codite::cme
