#pragma once

// ============================================================================
// data: synthetic generators with attached closed-form ground truth,
// observational CSV ingestion, and evaluation metrics.
// ============================================================================

#include "codite/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace codite::data {

struct Dataset {
    Matrix X;     // n x d covariates
    IntVector z;  // binary treatment assignment
    Vector y;     // observed outcome

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index d() const { return X.cols(); }
    Eigen::Index group_size(int group) const;
    std::vector<Eigen::Index> group_indices(int group) const;
    Matrix group_X(int group) const;
    Vector group_y(int group) const;

    // Shape, finiteness, z in {0,1}; both classes required for analysis entry
    // points.
    void validate(bool require_both_classes = true) const;
};

enum class NoiseSetting { SN, LN, HN };

std::string setting_name(NoiseSetting setting);
NoiseSetting setting_from_name(const std::string& name);  // throws ArgumentError

// Closed-form evaluators for the generating law (Gaussian conditionals in
// both generators).
struct SyntheticTruth {
    enum class Law { toy, ihdp } law = Law::toy;
    NoiseSetting setting = NoiseSetting::SN;  // ihdp only
    Vector beta;                              // ihdp only
    Eigen::Index mix_column = -1;             // ihdp HN: binary mixing covariate
    std::uint64_t seed = 0;

    double cond_mean0(const Vector& x) const;
    double cond_mean1(const Vector& x) const;
    double cond_std0(const Vector& x) const;
    double cond_std1(const Vector& x) const;
    double cate(const Vector& x) const { return cond_mean1(x) - cond_mean0(x); }
};

// JSON sidecar round-trip for truth + generator metadata.
std::string truth_to_json(const SyntheticTruth& truth);
SyntheticTruth truth_from_json(const std::string& text);

struct SyntheticDataset {
    Dataset base;
    Vector y0;
    Vector y1;
    SyntheticTruth truth;
};

// Treatment-assignment law.  Constant propensity is the randomized-experiment
// default; the logistic mode (e(x) = sigmoid(slope * (x_0 - center))) exists
// to stress the fitted-propensity path with confounded assignment.
struct AssignmentSpec {
    enum class Mode { constant, logistic } mode = Mode::constant;
    double p = 0.5;
    double slope = 2.0;
    double center = 0.5;

    double propensity(const Vector& x) const;
    static AssignmentSpec constant(double p) { return {Mode::constant, p, 0.0, 0.0}; }
    static AssignmentSpec logistic(double slope, double center) {
        return {Mode::logistic, 0.5, slope, center};
    }
};

// Scalar-covariate law: X ~ U[0,1]; Y0 = 3 + 5X + s(X)N, Y1 = 4X + s(X)N with
// one shared N ~ N(0,1) per unit and s(X) = 1_{X<0.3} + 7·1_{X>=0.3}(1+(X-0.3)).
SyntheticDataset gen_toy(Eigen::Index n, const AssignmentSpec& assignment, std::uint64_t seed);
SyntheticDataset gen_toy(Eigen::Index n, double propensity, std::uint64_t seed);

// 25-covariate law (6 standard-normal continuous + 19 Bernoulli(0.5) binary
// stand-ins): Y0 = βX + ε, Y1 = βX + 4 + ε with shared ε; ε per setting is
// N(0,1) (SN), N(0,20²) (LN), or the first binary covariate mixing the two
// (HN).  β is drawn from {0,...,0.4} with the documented weights.
SyntheticDataset gen_ihdp_like(Eigen::Index n, NoiseSetting setting, std::uint64_t seed,
                               const AssignmentSpec& assignment = AssignmentSpec::constant(0.5),
                               Eigen::Index d = 25, Eigen::Index n_continuous = 6);

// ----------------------------------------------------------------------------
// CSV ingestion / export.  Schema: header row, named covariate columns,
// treatment column of literal 0/1, numeric outcome.
// ----------------------------------------------------------------------------

Dataset load_csv(const std::string& path, const std::vector<std::string>& covariate_columns,
                 const std::string& treatment_column, const std::string& outcome_column);

// Covariate columns named x for d=1, else x0..x{d-1}; optional y0/y1 columns
// for synthetic exports.
std::string dataset_to_csv(const Dataset& dataset, const Vector* y0 = nullptr,
                           const Vector* y1 = nullptr);

// Default column names used by dataset_to_csv, for symmetric re-ingestion.
std::vector<std::string> default_covariate_columns(Eigen::Index d);

// ----------------------------------------------------------------------------
// Metrics.
// ----------------------------------------------------------------------------

// Mean squared difference (Monte Carlo precision-of-estimation metric).
double pehde(const Vector& estimates, const Vector& truth_values);

// sqrt(pehde).
double rmse(const Vector& estimates, const Vector& truth_values);

}  // namespace codite::data
