#include "codite/cme.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace codite::cme {

std::string group_name(Group group) {
    return group == Group::control ? "control" : "treatment";
}

CmeModel CmeModel::fit(Matrix X, Vector Y, const kernels::KernelSpec& k_spec,
                       const kernels::KernelSpec& l_spec, double lambda, Group group) {
    if (X.rows() == 0) throw ArgumentError("fit_cme: empty sample");
    if (X.rows() != Y.size()) {
        throw ArgumentError("fit_cme: " + std::to_string(X.rows()) + " covariate rows vs " +
                            std::to_string(Y.size()) + " outcomes");
    }
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw ArgumentError("fit_cme: lambda must be positive and finite");
    }
    kernels::validate(k_spec);
    kernels::validate(l_spec);
    if (!Y.allFinite()) throw DataError("fit_cme: outcomes contain NaN or Inf");

    CmeModel model;
    model.group_ = group;
    model.k_spec_ = k_spec;
    model.l_spec_ = l_spec;
    model.x_ = std::move(X);
    model.y_ = std::move(Y);
    model.lambda_ = lambda;
    const Matrix gram = kernels::gram_values(k_spec, model.x_, model.x_);
    const double ridge =
        solvers::effective_ridge(static_cast<double>(model.x_.rows()) * lambda, gram.trace());
    model.factor_ = std::make_shared<const solvers::SpdFactor>(gram, ridge);
    return model;
}

Vector CmeModel::alpha(const Vector& x) const {
    if (x.size() != x_.cols()) {
        throw ArgumentError("cme: query has dimension " + std::to_string(x.size()) +
                            ", trained on " + std::to_string(x_.cols()));
    }
    if (!x.allFinite()) throw ArgumentError("cme: query contains NaN or Inf");
    Vector k_vec(x_.rows());
    kernels::kernel_column(k_spec_, x_, x.data(), k_vec.data());
    return factor_->solve(k_vec);
}

Matrix CmeModel::alpha_batch(const Matrix& Xq) const {
    if (Xq.cols() != x_.cols()) {
        throw ArgumentError("cme: query has dimension " + std::to_string(Xq.cols()) +
                            ", trained on " + std::to_string(x_.cols()));
    }
    Matrix k_block = kernels::gram_values(k_spec_, x_, Xq);
    factor_->solve_in_place(k_block);
    return k_block;
}

double CmeModel::mu(const Vector& x, double y) const {
    const Vector a = alpha(x);
    Vector l_vec(y_.size());
    kernels::kernel_column(l_spec_, y_, &y, l_vec.data());
    return a.dot(l_vec);
}

CmeModel fit_cme(Matrix X, Vector Y, const kernels::KernelSpec& k_spec,
                 const kernels::KernelSpec& l_spec, double lambda, Group group) {
    return CmeModel::fit(std::move(X), std::move(Y), k_spec, l_spec, lambda, group);
}

// ----------------------------------------------------------------------------
// paired evaluation
// ----------------------------------------------------------------------------

CmePair::CmePair(const CmeModel& m0, const CmeModel& m1) : m0_(m0), m1_(m1) {
    if (!(m0.l_spec() == m1.l_spec())) {
        throw ArgumentError("cme: paired models must share the outcome kernel");
    }
    if (m0.X_train().cols() != m1.X_train().cols()) {
        throw ArgumentError("cme: paired models have different covariate dimensions");
    }
    l00_ = kernels::gram_values(m0.l_spec(), m0.Y_train(), m0.Y_train());
    l11_ = kernels::gram_values(m1.l_spec(), m1.Y_train(), m1.Y_train());
    l01_ = kernels::gram_values(m0.l_spec(), m0.Y_train(), m1.Y_train());
}

double CmePair::mmd_sq(const Vector& x) const {
    const Vector a0 = m0_.alpha(x);
    const Vector a1 = m1_.alpha(x);
    return a0.dot(l00_ * a0) - 2.0 * a0.dot(l01_ * a1) + a1.dot(l11_ * a1);
}

double CmePair::mmd(const Vector& x) const { return std::sqrt(std::max(0.0, mmd_sq(x))); }

Vector CmePair::mmd_sq_batch(const Matrix& Xq) const {
    const Matrix a0 = m0_.alpha_batch(Xq);
    const Matrix a1 = m1_.alpha_batch(Xq);
    const Matrix p0 = l00_ * a0;
    const Matrix p1 = l11_ * a1;
    const Matrix c01 = l01_ * a1;
    Vector out(Xq.rows());
    for (Eigen::Index q = 0; q < Xq.rows(); ++q) {
        out(q) = a0.col(q).dot(p0.col(q)) - 2.0 * a0.col(q).dot(c01.col(q)) +
                 a1.col(q).dot(p1.col(q));
    }
    return out;
}

double CmePair::witness(const Vector& x, double y) const {
    return m1_.mu(x, y) - m0_.mu(x, y);
}

WitnessGrid CmePair::witness_grid(const Matrix& x_grid, const Vector& y_grid) const {
    if (x_grid.rows() == 0 || y_grid.size() == 0) {
        throw ArgumentError("witness_grid: grids must be non-empty");
    }
    const Matrix a0 = m0_.alpha_batch(x_grid);  // n0 x |xg|
    const Matrix a1 = m1_.alpha_batch(x_grid);  // n1 x |xg|
    const Matrix ly0 = kernels::gram_values(m0_.l_spec(), m0_.Y_train(),
                                            Matrix(y_grid));  // n0 x |yg|
    const Matrix ly1 = kernels::gram_values(m1_.l_spec(), m1_.Y_train(), Matrix(y_grid));
    WitnessGrid grid;
    grid.x_grid = x_grid;
    grid.y_grid = y_grid;
    grid.values = a1.transpose() * ly1 - a0.transpose() * ly0;
    return grid;
}

double codite_mmd(const CmeModel& m0, const CmeModel& m1, const Vector& x) {
    return CmePair(m0, m1).mmd(x);
}

double codite_mmd_sq(const CmeModel& m0, const CmeModel& m1, const Vector& x) {
    return CmePair(m0, m1).mmd_sq(x);
}

double witness(const CmeModel& m0, const CmeModel& m1, const Vector& x, double y) {
    if (!(m0.l_spec() == m1.l_spec())) {
        throw ArgumentError("cme: paired models must share the outcome kernel");
    }
    return m1.mu(x, y) - m0.mu(x, y);
}

WitnessGrid witness_grid(const CmeModel& m0, const CmeModel& m1, const Matrix& x_grid,
                         const Vector& y_grid) {
    return CmePair(m0, m1).witness_grid(x_grid, y_grid);
}

// ----------------------------------------------------------------------------
// serialization
// ----------------------------------------------------------------------------

std::string witness_grid_to_csv(const WitnessGrid& grid) {
    std::ostringstream out;
    const auto d = grid.x_grid.cols();
    out << "x_index,y_index";
    if (d == 1) {
        out << ",x";
    } else {
        for (Eigen::Index c = 0; c < d; ++c) out << ",x" << c;
    }
    out << ",y,value\n";
    for (Eigen::Index i = 0; i < grid.x_grid.rows(); ++i) {
        for (Eigen::Index j = 0; j < grid.y_grid.size(); ++j) {
            out << i << "," << j << ",";
            for (Eigen::Index c = 0; c < d; ++c) {
                out << format_double(grid.x_grid(i, c)) << ",";
            }
            out << format_double(grid.y_grid(j)) << "," << format_double(grid.values(i, j))
                << "\n";
        }
    }
    return out.str();
}

std::string witness_grid_to_json(const WitnessGrid& grid) {
    nlohmann::json j;
    j["x_grid"] = nlohmann::json::array();
    for (Eigen::Index i = 0; i < grid.x_grid.rows(); ++i) {
        std::vector<double> row(grid.x_grid.row(i).begin(), grid.x_grid.row(i).end());
        j["x_grid"].push_back(row);
    }
    j["y_grid"] = std::vector<double>(grid.y_grid.begin(), grid.y_grid.end());
    j["values"] = nlohmann::json::array();
    for (Eigen::Index i = 0; i < grid.values.rows(); ++i) {
        std::vector<double> row(grid.values.row(i).begin(), grid.values.row(i).end());
        j["values"].push_back(row);
    }
    return j.dump(2);
}

// ----------------------------------------------------------------------------
// cross-validated lambda
// ----------------------------------------------------------------------------

LambdaSelection select_lambda_detailed(const Matrix& X, const Vector& Y,
                                       const kernels::KernelSpec& k_spec,
                                       const kernels::KernelSpec& l_spec,
                                       const std::vector<double>& grid, int folds) {
    if (grid.empty()) throw ArgumentError("select_lambda: empty grid");
    for (const double lam : grid) {
        if (!(lam > 0.0) || !std::isfinite(lam)) {
            throw ArgumentError("select_lambda: grid values must be positive");
        }
    }
    if (folds < 2) throw ArgumentError("select_lambda: folds must be >= 2");
    const auto n = X.rows();
    if (n != Y.size()) throw ArgumentError("select_lambda: length mismatch");
    if (folds > n) throw ArgumentError("select_lambda: more folds than points");

    // Strided deterministic folds; every fold is non-empty because folds <= n.
    std::vector<std::vector<Eigen::Index>> test_idx(static_cast<std::size_t>(folds));
    for (Eigen::Index i = 0; i < n; ++i) {
        test_idx[static_cast<std::size_t>(i % folds)].push_back(i);
    }

    LambdaSelection selection;
    selection.losses.assign(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        const auto& test = test_idx[static_cast<std::size_t>(f)];
        std::vector<Eigen::Index> train;
        train.reserve(static_cast<std::size_t>(n) - test.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            if (static_cast<int>(i % folds) != f) train.push_back(i);
        }

        Matrix x_tr(static_cast<Eigen::Index>(train.size()), X.cols());
        Vector y_tr(static_cast<Eigen::Index>(train.size()));
        for (std::size_t r = 0; r < train.size(); ++r) {
            x_tr.row(static_cast<Eigen::Index>(r)) = X.row(train[r]);
            y_tr(static_cast<Eigen::Index>(r)) = Y(train[r]);
        }
        Matrix x_te(static_cast<Eigen::Index>(test.size()), X.cols());
        Vector y_te(static_cast<Eigen::Index>(test.size()));
        for (std::size_t r = 0; r < test.size(); ++r) {
            x_te.row(static_cast<Eigen::Index>(r)) = X.row(test[r]);
            y_te(static_cast<Eigen::Index>(r)) = Y(test[r]);
        }

        const Matrix k_tr = kernels::gram_values(k_spec, x_tr, x_tr);
        const Matrix k_cross = kernels::gram_values(k_spec, x_tr, x_te);
        const Matrix l_tr = kernels::gram_values(l_spec, y_tr, y_tr);
        const Matrix l_cross = kernels::gram_values(l_spec, y_tr, y_te);

        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double ridge = solvers::effective_ridge(
                static_cast<double>(x_tr.rows()) * grid[g], k_tr.trace());
            const Matrix a = solvers::spd_solve(k_tr, ridge, k_cross);  // n_tr x n_te
            // ‖l(y_j,·) − μ̂(x_j)‖² = l(y_j,y_j) − 2 αᵀl_vec + αᵀ L α, summed over j.
            double loss = 0.0;
            for (Eigen::Index j = 0; j < x_te.rows(); ++j) {
                const auto a_j = a.col(j);
                const double self = kernels::eval_kernel(l_spec, y_te.segment(j, 1),
                                                         y_te.segment(j, 1));
                loss += self - 2.0 * a_j.dot(l_cross.col(j)) + a_j.dot(l_tr * a_j);
            }
            selection.losses[g] += loss;
        }
    }
    for (double& loss : selection.losses) loss /= static_cast<double>(n);

    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const bool better = selection.losses[g] < selection.losses[best];
        const bool tie_larger =
            selection.losses[g] == selection.losses[best] && grid[g] > grid[best];
        if (better || tie_larger) best = g;
    }
    selection.lambda = grid[best];
    return selection;
}

double select_lambda(const Matrix& X, const Vector& Y, const kernels::KernelSpec& k_spec,
                     const kernels::KernelSpec& l_spec, const std::vector<double>& grid,
                     int folds) {
    return select_lambda_detailed(X, Y, k_spec, l_spec, grid, folds).lambda;
}

}  // namespace codite::cme
