#include "codite/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

namespace codite::data {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Toy conditional scale: s(x) = 1 for x < 0.3, else 7(1 + (x - 0.3)).
double toy_scale(double x) { return x < 0.3 ? 1.0 : 7.0 * (1.0 + (x - 0.3)); }

void require(bool ok, const std::string& message) {
    if (!ok) throw ArgumentError(message);
}

}  // namespace

// ----------------------------------------------------------------------------
// Dataset
// ----------------------------------------------------------------------------

Eigen::Index Dataset::group_size(int group) const {
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (z(i) == group) ++count;
    }
    return count;
}

std::vector<Eigen::Index> Dataset::group_indices(int group) const {
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (z(i) == group) idx.push_back(i);
    }
    return idx;
}

Matrix Dataset::group_X(int group) const {
    const std::vector<Eigen::Index> idx = group_indices(group);
    Matrix out(static_cast<Eigen::Index>(idx.size()), X.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = X.row(idx[r]);
    return out;
}

Vector Dataset::group_y(int group) const {
    const std::vector<Eigen::Index> idx = group_indices(group);
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) out(static_cast<Eigen::Index>(r)) = y(idx[r]);
    return out;
}

void Dataset::validate(bool require_both_classes) const {
    if (X.rows() == 0) throw DataError("dataset is empty");
    if (z.size() != X.rows() || y.size() != X.rows()) {
        throw DataError("dataset columns disagree on sample count: X has " +
                        std::to_string(X.rows()) + " rows, z has " + std::to_string(z.size()) +
                        ", y has " + std::to_string(y.size()));
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw DataError("dataset contains non-finite covariates or outcomes");
    }
    Eigen::Index n0 = 0;
    Eigen::Index n1 = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (z(i) == 0) {
            ++n0;
        } else if (z(i) == 1) {
            ++n1;
        } else {
            throw DataError("treatment indicator must be 0 or 1, found " + std::to_string(z(i)) +
                            " at row " + std::to_string(i));
        }
    }
    if (require_both_classes && (n0 == 0 || n1 == 0)) {
        throw DataError("dataset has a single treatment class (" + std::to_string(n0) +
                        " control, " + std::to_string(n1) + " treated); both are required");
    }
}

// ----------------------------------------------------------------------------
// Settings / truth
// ----------------------------------------------------------------------------

std::string setting_name(NoiseSetting setting) {
    switch (setting) {
        case NoiseSetting::SN: return "SN";
        case NoiseSetting::LN: return "LN";
        case NoiseSetting::HN: return "HN";
    }
    throw ArgumentError("unknown noise setting");
}

NoiseSetting setting_from_name(const std::string& name) {
    if (name == "SN") return NoiseSetting::SN;
    if (name == "LN") return NoiseSetting::LN;
    if (name == "HN") return NoiseSetting::HN;
    throw ArgumentError("unknown noise setting '" + name + "' (expected SN, LN, or HN)");
}

namespace {

void check_truth_input(const SyntheticTruth& truth, const Vector& x) {
    if (truth.law == SyntheticTruth::Law::toy) {
        if (x.size() != 1) throw ArgumentError("toy truth expects a scalar covariate");
    } else {
        if (x.size() != truth.beta.size()) {
            throw ArgumentError("truth expects " + std::to_string(truth.beta.size()) +
                                " covariates, got " + std::to_string(x.size()));
        }
    }
}

}  // namespace

double SyntheticTruth::cond_mean0(const Vector& x) const {
    check_truth_input(*this, x);
    if (law == Law::toy) return 3.0 + 5.0 * x(0);
    return beta.dot(x);
}

double SyntheticTruth::cond_mean1(const Vector& x) const {
    check_truth_input(*this, x);
    if (law == Law::toy) return 4.0 * x(0);
    return beta.dot(x) + 4.0;
}

double SyntheticTruth::cond_std0(const Vector& x) const {
    check_truth_input(*this, x);
    if (law == Law::toy) return toy_scale(x(0));
    switch (setting) {
        case NoiseSetting::SN: return 1.0;
        case NoiseSetting::LN: return 20.0;
        case NoiseSetting::HN: return x(mix_column) > 0.5 ? 1.0 : 20.0;
    }
    throw ArgumentError("unknown noise setting");
}

double SyntheticTruth::cond_std1(const Vector& x) const {
    // Both potential outcomes share the same noise in both laws.
    return cond_std0(x);
}

std::string truth_to_json(const SyntheticTruth& truth) {
    nlohmann::json j;
    j["law"] = truth.law == SyntheticTruth::Law::toy ? "toy" : "ihdp";
    j["seed"] = truth.seed;
    if (truth.law == SyntheticTruth::Law::ihdp) {
        j["setting"] = setting_name(truth.setting);
        j["mix_column"] = truth.mix_column;
        j["beta"] = std::vector<double>(truth.beta.data(), truth.beta.data() + truth.beta.size());
    }
    return j.dump(2);
}

SyntheticTruth truth_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("truth sidecar is not valid JSON: ") + e.what());
    }
    SyntheticTruth truth;
    try {
        const std::string law = j.at("law").get<std::string>();
        truth.seed = j.at("seed").get<std::uint64_t>();
        if (law == "toy") {
            truth.law = SyntheticTruth::Law::toy;
        } else if (law == "ihdp") {
            truth.law = SyntheticTruth::Law::ihdp;
            truth.setting = setting_from_name(j.at("setting").get<std::string>());
            truth.mix_column = j.at("mix_column").get<Eigen::Index>();
            const std::vector<double> beta = j.at("beta").get<std::vector<double>>();
            truth.beta = Eigen::Map<const Vector>(beta.data(), static_cast<Eigen::Index>(beta.size()));
        } else {
            throw DataError("truth sidecar names unknown law '" + law + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("truth sidecar is missing required fields: ") + e.what());
    }
    return truth;
}

// ----------------------------------------------------------------------------
// Generators
// ----------------------------------------------------------------------------

double AssignmentSpec::propensity(const Vector& x) const {
    if (mode == Mode::constant) return p;
    return sigmoid(slope * (x(0) - center));
}

namespace {

IntVector draw_assignment(const Matrix& X, const AssignmentSpec& assignment, std::uint64_t seed) {
    Rng rng(rng::substream(seed, rng::kTagAssignment, 0));
    IntVector z(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const Vector xi = X.row(i).transpose();
        const double e = assignment.propensity(xi);
        if (!(e > 0.0 && e < 1.0)) {
            throw ArgumentError("assignment propensity must lie strictly inside (0, 1), got " +
                                std::to_string(e));
        }
        z(i) = rng.bernoulli(e) ? 1 : 0;
    }
    return z;
}

}  // namespace

SyntheticDataset gen_toy(Eigen::Index n, const AssignmentSpec& assignment, std::uint64_t seed) {
    require(n >= 1, "gen_toy requires n >= 1");

    SyntheticDataset out;
    out.base.X.resize(n, 1);
    out.y0.resize(n);
    out.y1.resize(n);

    Rng rx(rng::substream(seed, rng::kTagCovariates, 0));
    for (Eigen::Index i = 0; i < n; ++i) out.base.X(i, 0) = rx.uniform();

    // One shared noise draw feeds both potential outcomes.
    Rng rn(rng::substream(seed, rng::kTagNoise, 0));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = out.base.X(i, 0);
        const double noise = toy_scale(x) * rn.normal();
        out.y0(i) = 3.0 + 5.0 * x + noise;
        out.y1(i) = 4.0 * x + noise;
    }

    out.base.z = draw_assignment(out.base.X, assignment, seed);
    out.base.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.base.y(i) = out.base.z(i) == 1 ? out.y1(i) : out.y0(i);
    }

    out.truth.law = SyntheticTruth::Law::toy;
    out.truth.seed = seed;
    return out;
}

SyntheticDataset gen_toy(Eigen::Index n, double propensity, std::uint64_t seed) {
    return gen_toy(n, AssignmentSpec::constant(propensity), seed);
}

namespace {

// Coefficient draw: continuous covariates use weights {.5,.125,.125,.125,.125}
// over {0,.1,.2,.3,.4}; binary covariates use {.6,.1,.1,.1,.1}.
double draw_coefficient(Rng& rng, bool continuous) {
    static constexpr double kLevels[5] = {0.0, 0.1, 0.2, 0.3, 0.4};
    const double head = continuous ? 0.5 : 0.6;
    const double tail = (1.0 - head) / 4.0;
    const double u = rng.uniform();
    double cum = head;
    for (int level = 0; level < 4; ++level) {
        if (u < cum) return kLevels[level];
        cum += tail;
    }
    return kLevels[4];
}

}  // namespace

SyntheticDataset gen_ihdp_like(Eigen::Index n, NoiseSetting setting, std::uint64_t seed,
                               const AssignmentSpec& assignment, Eigen::Index d,
                               Eigen::Index n_continuous) {
    require(n >= 1, "gen_ihdp_like requires n >= 1");
    require(n_continuous >= 0 && n_continuous <= d, "n_continuous must lie in [0, d]");
    require(d >= 1, "gen_ihdp_like requires d >= 1");
    if (setting == NoiseSetting::HN) {
        require(n_continuous < d, "HN setting needs at least one binary covariate to mix on");
    }

    SyntheticDataset out;
    out.base.X.resize(n, d);
    out.y0.resize(n);
    out.y1.resize(n);

    // Covariates row-wise: continuous N(0,1) first, then Bernoulli(0.5).
    Rng rx(rng::substream(seed, rng::kTagCovariates, 0));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n_continuous; ++j) out.base.X(i, j) = rx.normal();
        for (Eigen::Index j = n_continuous; j < d; ++j) {
            out.base.X(i, j) = rx.bernoulli(0.5) ? 1.0 : 0.0;
        }
    }

    Rng rb(rng::substream(seed, rng::kTagCoefficients, 0));
    out.truth.beta.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        out.truth.beta(j) = draw_coefficient(rb, j < n_continuous);
    }

    // Two base normals per unit so the covariate/coefficient draws and the
    // noise stream are identical across settings under one seed.
    const Eigen::Index mix_column = n_continuous;
    Rng rn(rng::substream(seed, rng::kTagNoise, 0));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double eps_sn = rn.normal();
        const double eps_ln = 20.0 * rn.normal();
        double eps = 0.0;
        switch (setting) {
            case NoiseSetting::SN: eps = eps_sn; break;
            case NoiseSetting::LN: eps = eps_ln; break;
            case NoiseSetting::HN:
                eps = out.base.X(i, mix_column) > 0.5 ? eps_sn : eps_ln;
                break;
        }
        const double signal = out.truth.beta.dot(out.base.X.row(i).transpose());
        out.y0(i) = signal + eps;
        out.y1(i) = signal + 4.0 + eps;
    }

    out.base.z = draw_assignment(out.base.X, assignment, seed);
    out.base.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.base.y(i) = out.base.z(i) == 1 ? out.y1(i) : out.y0(i);
    }

    out.truth.law = SyntheticTruth::Law::ihdp;
    out.truth.setting = setting;
    out.truth.mix_column = mix_column;
    out.truth.seed = seed;
    return out;
}

// ----------------------------------------------------------------------------
// CSV
// ----------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double parse_cell(const std::string& raw, std::size_t line_number, const std::string& column) {
    const std::string cell = trim(raw);
    if (cell.empty()) {
        throw DataError("parse error at line " + std::to_string(line_number) + ", column '" +
                        column + "': empty cell");
    }
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw DataError("parse error at line " + std::to_string(line_number) + ", column '" +
                        column + "': cannot parse '" + cell + "' as a number");
    }
    return value;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::vector<std::string>& covariate_columns,
                 const std::string& treatment_column, const std::string& outcome_column) {
    if (covariate_columns.empty()) throw ArgumentError("at least one covariate column is required");

    std::ifstream in(path);
    if (!in) throw DataError("cannot open file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("file '" + path + "' is empty");
    std::vector<std::string> header = split_csv_line(line);
    for (std::string& name : header) name = trim(name);

    const auto column_index = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw DataError("missing column '" + name + "' in header of '" + path + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    };

    std::vector<std::size_t> x_cols;
    x_cols.reserve(covariate_columns.size());
    for (const std::string& name : covariate_columns) x_cols.push_back(column_index(name));
    const std::size_t z_col = column_index(treatment_column);
    const std::size_t y_col = column_index(outcome_column);

    std::vector<std::vector<double>> x_rows;
    std::vector<int> z_vals;
    std::vector<double> y_vals;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw DataError("parse error at line " + std::to_string(line_number) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        }
        std::vector<double> row(covariate_columns.size());
        for (std::size_t c = 0; c < x_cols.size(); ++c) {
            row[c] = parse_cell(fields[x_cols[c]], line_number, covariate_columns[c]);
        }
        const double z_raw = parse_cell(fields[z_col], line_number, treatment_column);
        if (z_raw != 0.0 && z_raw != 1.0) {
            throw DataError("parse error at line " + std::to_string(line_number) + ", column '" +
                            treatment_column + "': treatment must be 0 or 1, found '" +
                            trim(fields[z_col]) + "'");
        }
        x_rows.push_back(std::move(row));
        z_vals.push_back(static_cast<int>(z_raw));
        y_vals.push_back(parse_cell(fields[y_col], line_number, outcome_column));
    }

    if (x_rows.empty()) throw DataError("file '" + path + "' has a header but no data rows");

    Dataset dataset;
    const Eigen::Index n = static_cast<Eigen::Index>(x_rows.size());
    const Eigen::Index d = static_cast<Eigen::Index>(covariate_columns.size());
    dataset.X.resize(n, d);
    dataset.z.resize(n);
    dataset.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            dataset.X(i, j) = x_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        dataset.z(i) = z_vals[static_cast<std::size_t>(i)];
        dataset.y(i) = y_vals[static_cast<std::size_t>(i)];
    }
    dataset.validate(/*require_both_classes=*/true);
    return dataset;
}

std::vector<std::string> default_covariate_columns(Eigen::Index d) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(d));
    if (d == 1) {
        names.emplace_back("x");
    } else {
        for (Eigen::Index j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
    }
    return names;
}

std::string dataset_to_csv(const Dataset& dataset, const Vector* y0, const Vector* y1) {
    if ((y0 == nullptr) != (y1 == nullptr)) {
        throw ArgumentError("potential-outcome columns must be provided together");
    }
    if (y0 != nullptr && (y0->size() != dataset.n() || y1->size() != dataset.n())) {
        throw ArgumentError("potential-outcome columns must match the dataset length");
    }

    std::ostringstream out;
    const std::vector<std::string> x_names = default_covariate_columns(dataset.d());
    for (const std::string& name : x_names) out << name << ',';
    out << "z,y";
    if (y0 != nullptr) out << ",y0,y1";
    out << '\n';

    for (Eigen::Index i = 0; i < dataset.n(); ++i) {
        for (Eigen::Index j = 0; j < dataset.d(); ++j) {
            out << format_double(dataset.X(i, j)) << ',';
        }
        out << dataset.z(i) << ',' << format_double(dataset.y(i));
        if (y0 != nullptr) {
            out << ',' << format_double((*y0)(i)) << ',' << format_double((*y1)(i));
        }
        out << '\n';
    }
    return out.str();
}

// ----------------------------------------------------------------------------
// Metrics
// ----------------------------------------------------------------------------

double pehde(const Vector& estimates, const Vector& truth_values) {
    if (estimates.size() != truth_values.size()) {
        throw ArgumentError("metric inputs disagree on length: " + std::to_string(estimates.size()) +
                            " vs " + std::to_string(truth_values.size()));
    }
    if (estimates.size() == 0) throw ArgumentError("metric inputs are empty");
    return (estimates - truth_values).squaredNorm() / static_cast<double>(estimates.size());
}

double rmse(const Vector& estimates, const Vector& truth_values) {
    return std::sqrt(pehde(estimates, truth_values));
}

}  // namespace codite::data
