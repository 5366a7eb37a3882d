#include "codite/kcd.hpp"

#include "codite/solvers.hpp"

#include <json.hpp>

#include <cmath>
#include <vector>

namespace codite::kcd {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// log(1 + e^t) without overflow.
double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double clip_probability(double p, double eps) { return std::min(std::max(p, eps), 1.0 - eps); }

void check_clip(double eps) {
    if (!(eps > 0.0 && eps < 0.5)) {
        throw ArgumentError("propensity clip must lie in (0, 0.5), got " + std::to_string(eps));
    }
}

// Penalized negative log-likelihood: Σ softplus(fᵢ) - zᵢfᵢ + (ridge/2)βᵀKβ.
double penalized_nll(const Vector& f, const IntVector& z, const Matrix& K, const Vector& beta,
                     double ridge) {
    double nll = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        nll += softplus(f(i)) - (z(i) == 1 ? f(i) : 0.0);
    }
    return nll + 0.5 * ridge * beta.dot(K * beta);
}

}  // namespace

// ----------------------------------------------------------------------------
// Kernel logistic regression
// ----------------------------------------------------------------------------

PropensityModel fit_propensity_klr(const Matrix& X, const IntVector& z,
                                   const kernels::KernelSpec& k_spec, double ridge, int max_iter,
                                   double tol, double clip_eps) {
    kernels::validate(k_spec);
    check_clip(clip_eps);
    if (X.rows() == 0) throw ArgumentError("fit_propensity_klr: no training points");
    if (X.rows() != z.size()) {
        throw ArgumentError("fit_propensity_klr: covariates and labels disagree on length");
    }
    if (!(ridge > 0.0)) throw ArgumentError("fit_propensity_klr: ridge must be positive");
    if (max_iter < 1) throw ArgumentError("fit_propensity_klr: max_iter must be >= 1");

    const Eigen::Index n = X.rows();
    Eigen::Index n1 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (z(i) != 0 && z(i) != 1) {
            throw ArgumentError("fit_propensity_klr: labels must be 0 or 1");
        }
        if (z(i) == 1) ++n1;
    }
    if (n1 == 0 || n1 == n) {
        throw ArgumentError("fit_propensity_klr: labels contain a single class");
    }

    const Matrix K = kernels::gram_values(k_spec, X, X);

    PropensityModel model;
    model.k_spec = k_spec;
    model.X_train = X;
    model.ridge = ridge;
    model.clip_eps = clip_eps;
    model.dual_weights = Vector::Zero(n);
    // Start at the marginal log-odds; both classes are present so this is
    // finite.
    const double p_bar = static_cast<double>(n1) / static_cast<double>(n);
    model.intercept = std::log(p_bar / (1.0 - p_bar));

    Vector beta = model.dual_weights;
    double intercept = model.intercept;
    Vector f = Vector::Constant(n, intercept);
    double nll = penalized_nll(f, z, K, beta, ridge);

    Vector z_num(n);
    for (Eigen::Index i = 0; i < n; ++i) z_num(i) = static_cast<double>(z(i));

    bool converged = false;
    int iterations = 0;
    for (int it = 0; it < max_iter; ++it) {
        ++iterations;
        Vector p(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = sigmoid(f(i));
            w(i) = std::max(p(i) * (1.0 - p(i)), 1e-10);
        }

        // IRLS normal equations with the Gram factor cancelled from the
        // penalized block:
        //   [W K + ridge I, W 1] [β]   [W u]
        //   [    1ᵀW K    , 1ᵀW1] [b] = [1ᵀWu],  u = f + W⁻¹(z - p).
        Matrix system(n + 1, n + 1);
        system.topLeftCorner(n, n) = w.asDiagonal() * K;
        system.topLeftCorner(n, n).diagonal().array() += ridge;
        system.topRightCorner(n, 1) = w;
        system.bottomLeftCorner(1, n) = (K * w).transpose();
        system(n, n) = w.sum();

        Vector rhs(n + 1);
        const Vector wu = w.cwiseProduct(f) + (z_num - p);
        rhs.head(n) = wu;
        rhs(n) = wu.sum();

        const Vector solution = system.partialPivLu().solve(rhs);
        if (!solution.allFinite()) {
            throw NumericError("fit_propensity_klr: IRLS system solve produced non-finite values");
        }

        const Vector beta_step = solution.head(n) - beta;
        const double intercept_step = solution(n) - intercept;

        // Backtrack until the penalized objective does not increase.
        double scale = 1.0;
        bool improved = false;
        Vector beta_next, f_next;
        double intercept_next = 0.0, nll_next = 0.0;
        for (int halving = 0; halving < 40; ++halving) {
            beta_next = beta + scale * beta_step;
            intercept_next = intercept + scale * intercept_step;
            f_next = K * beta_next + Vector::Constant(n, intercept_next);
            nll_next = penalized_nll(f_next, z, K, beta_next, ridge);
            if (nll_next <= nll + 1e-12) {
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) break;

        const double shift = (f_next - f).lpNorm<Eigen::Infinity>();
        beta = beta_next;
        intercept = intercept_next;
        f = f_next;
        const bool flat = nll - nll_next <= tol * (1.0 + std::abs(nll));
        nll = nll_next;
        if (shift <= tol * (1.0 + f.lpNorm<Eigen::Infinity>()) || flat) {
            converged = true;
            break;
        }
    }

    model.dual_weights = beta;
    model.intercept = intercept;
    model.converged = converged;
    model.iterations = iterations;
    return model;
}

double PropensityModel::predict_one(const Vector& x) const {
    Matrix q(1, x.size());
    q.row(0) = x.transpose();
    return predict(q)(0);
}

Vector PropensityModel::predict(const Matrix& Xq) const {
    if (Xq.cols() != X_train.cols()) {
        throw ArgumentError("propensity query dimension " + std::to_string(Xq.cols()) +
                            " does not match training dimension " + std::to_string(X_train.cols()));
    }
    const Matrix cross = kernels::gram_values(k_spec, X_train, Xq);  // n x q
    Vector out = cross.transpose() * dual_weights;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double f = out(i) + intercept;
        if (!std::isfinite(f)) {
            throw NumericError("propensity prediction is non-finite");
        }
        out(i) = clip_probability(sigmoid(f), clip_eps);
    }
    return out;
}

// ----------------------------------------------------------------------------
// Propensity spec
// ----------------------------------------------------------------------------

PropensitySpec PropensitySpec::klr(double ridge, double clip) {
    PropensitySpec spec;
    spec.mode = Mode::klr;
    spec.klr_ridge = ridge;
    spec.clip_eps = clip;
    return spec;
}

PropensitySpec PropensitySpec::known(Vector values, double clip) {
    PropensitySpec spec;
    spec.mode = Mode::known;
    spec.known_values = std::move(values);
    spec.clip_eps = clip;
    return spec;
}

PropensitySpec PropensitySpec::constant(double p) {
    PropensitySpec spec;
    spec.mode = Mode::constant;
    spec.constant_p = p;
    return spec;
}

std::string propensity_mode_name(PropensitySpec::Mode mode) {
    switch (mode) {
        case PropensitySpec::Mode::klr: return "klr";
        case PropensitySpec::Mode::known: return "known";
        case PropensitySpec::Mode::constant: return "constant";
    }
    throw ArgumentError("unknown propensity mode");
}

// ----------------------------------------------------------------------------
// Statistic engine
// ----------------------------------------------------------------------------

namespace {

// Holds the pooled covariate and outcome Grams once; each statistic evaluation
// slices them for the given labels, so permutations never recompute kernels.
class Engine {
public:
    Engine(const data::Dataset& dataset, const kernels::KernelSpec& k_spec,
           const kernels::KernelSpec& l_spec, double lambda0, double lambda1)
        : lambda0_(lambda0), lambda1_(lambda1) {
        kernels::validate(k_spec);
        kernels::validate(l_spec);
        if (!(lambda0 > 0.0) || !(lambda1 > 0.0)) {
            throw ArgumentError("kcd: regularization scales must be positive");
        }
        K_ = kernels::gram_values(k_spec, dataset.X, dataset.X);
        Matrix outcomes(dataset.y.size(), 1);
        outcomes.col(0) = dataset.y;
        L_ = kernels::gram_values(l_spec, outcomes, outcomes);
    }

    double statistic(const IntVector& z) const {
        std::vector<Eigen::Index> idx0, idx1;
        idx0.reserve(static_cast<std::size_t>(z.size()));
        idx1.reserve(static_cast<std::size_t>(z.size()));
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            (z(i) == 1 ? idx1 : idx0).push_back(i);
        }
        if (idx0.empty() || idx1.empty()) {
            throw DegenerateInputError("kcd statistic needs both treatment groups non-empty");
        }

        const auto n = static_cast<double>(K_.rows());
        const Matrix W0 = group_weights(idx0, lambda0_);  // n0 x n
        const Matrix W1 = group_weights(idx1, lambda1_);  // n1 x n

        // Σᵢ αᵍ(xᵢ)ᵀ L_gh αʰ(xᵢ) as Frobenius inner products.
        const double term0 = symmetric_term(Matrix(L_(idx0, idx0)), W0);
        const double term1 = symmetric_term(Matrix(L_(idx1, idx1)), W1);
        const Matrix cross_block = L_(idx0, idx1) * W1;  // n0 x n
        const double cross = W0.cwiseProduct(cross_block).sum();
        return (term0 - 2.0 * cross + term1) / n;
    }

private:
    // (K_gg + ridge I)⁻¹ K_g,pooled: column i holds the group-g embedding
    // weights at pooled point xᵢ.
    Matrix group_weights(const std::vector<Eigen::Index>& idx, double lambda) const {
        const Matrix K_gg = K_(idx, idx);
        const double ridge = solvers::effective_ridge(
            static_cast<double>(idx.size()) * lambda, K_gg.trace());
        const solvers::SpdFactor factor(K_gg, ridge);
        Matrix weights = K_(idx, Eigen::all);
        factor.solve_in_place(weights);
        return weights;
    }

    // Tr(WᵀLW) = <L, WWᵀ>; the rank update touches half the entries.
    static double symmetric_term(const Matrix& L_block, const Matrix& W) {
        Matrix gram = Matrix::Zero(W.rows(), W.rows());
        gram.selfadjointView<Eigen::Lower>().rankUpdate(W);
        gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
        return L_block.cwiseProduct(gram).sum();
    }

    double lambda0_;
    double lambda1_;
    Matrix K_;
    Matrix L_;
};

Vector resolve_propensities(const data::Dataset& dataset, const KcdOptions& options) {
    const PropensitySpec& spec = options.propensity;
    const Eigen::Index n = dataset.n();
    switch (spec.mode) {
        case PropensitySpec::Mode::klr: {
            const PropensityModel model =
                fit_propensity_klr(dataset.X, dataset.z, options.k_spec, spec.klr_ridge,
                                   /*max_iter=*/100, /*tol=*/1e-9, spec.clip_eps);
            return model.predict(dataset.X);
        }
        case PropensitySpec::Mode::known: {
            check_clip(spec.clip_eps);
            if (spec.known_values.size() != n) {
                throw ArgumentError("known propensities have length " +
                                    std::to_string(spec.known_values.size()) + ", expected " +
                                    std::to_string(n));
            }
            Vector e = spec.known_values;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!(e(i) > 0.0 && e(i) < 1.0)) {
                    throw ArgumentError("known propensities must lie strictly inside (0, 1)");
                }
                e(i) = clip_probability(e(i), spec.clip_eps);
            }
            return e;
        }
        case PropensitySpec::Mode::constant: {
            if (!(spec.constant_p > 0.0 && spec.constant_p < 1.0)) {
                throw ArgumentError("constant propensity must lie strictly inside (0, 1)");
            }
            return Vector::Constant(n, spec.constant_p);
        }
    }
    throw ArgumentError("unknown propensity mode");
}

}  // namespace

// ----------------------------------------------------------------------------
// Public entry points
// ----------------------------------------------------------------------------

double p_value_from(double t_hat, const Vector& null_stats) {
    if (null_stats.size() == 0) throw ArgumentError("p_value_from: no permutation statistics");
    Eigen::Index exceed = 0;
    for (Eigen::Index i = 0; i < null_stats.size(); ++i) {
        if (null_stats(i) > t_hat) ++exceed;
    }
    return static_cast<double>(1 + exceed) / static_cast<double>(1 + null_stats.size());
}

double kcd_statistic(const data::Dataset& dataset, const kernels::KernelSpec& k_spec,
                     const kernels::KernelSpec& l_spec, double lambda0, double lambda1) {
    dataset.validate(/*require_both_classes=*/true);
    const Engine engine(dataset, k_spec, l_spec, lambda0, lambda1);
    return engine.statistic(dataset.z);
}

KcdTestResult kcd_test(const data::Dataset& dataset, const KcdOptions& options) {
    dataset.validate(/*require_both_classes=*/true);
    if (options.permutations < 1) {
        throw ArgumentError("kcd_test: permutation count must be >= 1, got " +
                            std::to_string(options.permutations));
    }
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
        throw ArgumentError("kcd_test: alpha must lie in (0, 1)");
    }
    if (options.max_redraws < 1) throw ArgumentError("kcd_test: max_redraws must be >= 1");
    if (dataset.group_size(0) < 2 || dataset.group_size(1) < 2) {
        throw DegenerateInputError("kcd_test needs at least two points per treatment group");
    }

    const Engine engine(dataset, options.k_spec, options.l_spec, options.lambda0, options.lambda1);
    const Vector propensities = resolve_propensities(dataset, options);

    KcdTestResult result;
    result.t_hat = engine.statistic(dataset.z);
    result.alpha = options.alpha;
    result.m = options.permutations;
    result.seed = options.seed;
    result.propensity_mode = propensity_mode_name(options.propensity.mode);
    result.propensities = propensities;
    result.null_stats.resize(options.permutations);

    const Eigen::Index n = dataset.n();
    parallel_for(options.permutations, [&](std::int64_t lo, std::int64_t hi) {
        IntVector labels(n);
        for (std::int64_t perm = lo; perm < hi; ++perm) {
            // One private stream per permutation index: the schedule cannot
            // change the draw, only who executes it.
            Rng rng(rng::substream(options.seed, rng::kTagPermutation,
                                   static_cast<std::uint64_t>(perm)));
            int draws = 0;
            while (true) {
                ++draws;
                Eigen::Index n1 = 0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    labels(i) = rng.bernoulli(propensities(i)) ? 1 : 0;
                    n1 += labels(i);
                }
                if (n1 > 0 && n1 < n) break;
                if (draws >= options.max_redraws) {
                    throw DegenerateInputError(
                        "permutation " + std::to_string(perm) + " drew a single-class labeling " +
                        std::to_string(draws) + " times in a row; propensities are too extreme");
                }
            }
            result.null_stats(perm) = engine.statistic(labels);
        }
    });

    result.p_value = p_value_from(result.t_hat, result.null_stats);
    result.rejected = result.p_value < options.alpha;
    return result;
}

std::string result_to_json(const KcdTestResult& result) {
    nlohmann::json j;
    j["t_hat"] = result.t_hat;
    j["p_value"] = result.p_value;
    j["alpha"] = result.alpha;
    j["rejected"] = result.rejected;
    j["m"] = result.m;
    j["seed"] = result.seed;
    j["propensity_mode"] = result.propensity_mode;
    j["null_stats"] = std::vector<double>(result.null_stats.data(),
                                          result.null_stats.data() + result.null_stats.size());
    return j.dump(2);
}

}  // namespace codite::kcd
