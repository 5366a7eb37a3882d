// ============================================================================
// codite: command-line driver for conditional distributional treatment-effect
// estimation.
//
// Subcommands
//   test      permutation test of equal conditional outcome distributions
//   witness   conditional witness surface over an (x, y) grid
//   ustat     conditional U-statistic curves (mean, std, gini, cdf, moments)
//   simulate  synthetic benchmark datasets with ground-truth sidecars
//   evaluate  estimation-error report (PEHDE / RMSE) over seeded repetitions
//
// Config precedence: command-line flags > --config JSON file > defaults.
// Every artifact is written atomically (temp file + rename) and every JSON
// report embeds the resolved config, the seed, and the library version, so
// a rerun with the same config and seed is byte-identical.
//
// Exit codes: 0 success, 2 validation/data error, 3 numeric failure.
// ============================================================================

#include "codite/cme.hpp"
#include "codite/common.hpp"
#include "codite/data.hpp"
#include "codite/kcd.hpp"
#include "codite/kernels.hpp"
#include "codite/ustat.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace codite;

namespace {

// ----------------------------------------------------------------------------
// Configuration: one flat bag of knobs shared by all subcommands.  Defaults
// live here; a --config file overlays them; flags win over both because the
// overlay happens before CLI11 writes parsed values.
// ----------------------------------------------------------------------------

struct CliConfig {
    std::string command;

    // input source: CSV file or named generator
    std::string input_csv;
    std::string generator;  // "toy" | "ihdp" | "" (csv input)
    std::string setting = "SN";
    std::int64_t n = 1000;
    double assign_p = 0.5;
    std::string covariates = "auto";  // comma list of column names, or "auto"
    std::string treatment_column = "z";
    std::string outcome_column = "y";

    // kernels
    std::string kernel = "gaussian";
    std::string bandwidth = "median";
    std::string l_kernel = "gaussian";
    std::string l_bandwidth = "median";

    // regularization: numeric value or "cv"
    std::string lambda = "0.01";

    // test settings
    std::int64_t permutations = 100;
    double alpha = 0.05;
    std::string propensity = "klr";  // klr | known:<column> | const:<p>
    double klr_ridge = 1.0;
    double clip = 0.01;
    std::int64_t max_redraws = 100;

    // evaluation grids
    std::string x_grid = "0.05:0.95:19";
    std::string y_grid = "auto";
    std::string x_at;  // comma list; base point when d > 1
    std::int64_t x_coord = 0;

    // ustat / evaluate
    std::vector<std::string> quantities;  // default {"mean", "std"}
    std::int64_t reps = 10;
    std::string truth_path;

    std::uint64_t seed = 0;
    std::string out;
    std::string config_path;
};

// ----------------------------------------------------------------------------
// Small parsing helpers (strict: trailing junk is an error).
// ----------------------------------------------------------------------------

double parse_double(const std::string& text, const std::string& what) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw ArgumentError(what + ": expected a finite number, got '" + text + "'");
    }
    return value;
}

std::int64_t parse_int(const std::string& text, const std::string& what) {
    std::int64_t value = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw ArgumentError(what + ": expected an integer, got '" + text + "'");
    }
    return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string piece;
    std::istringstream in(text);
    while (std::getline(in, piece, sep)) parts.push_back(piece);
    if (!text.empty() && text.back() == sep) parts.push_back("");
    return parts;
}

// "<lo>:<hi>:<count>" -> inclusive linspace; count 0 is an empty grid.
Vector parse_grid(const std::string& text, const std::string& flag) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) {
        throw ArgumentError(flag + ": expected '<lo>:<hi>:<count>', got '" + text + "'");
    }
    const double lo = parse_double(parts[0], flag);
    const double hi = parse_double(parts[1], flag);
    const std::int64_t count = parse_int(parts[2], flag);
    if (count < 0) throw ArgumentError(flag + ": count must be >= 0, got " + parts[2]);
    Vector grid(count);
    for (std::int64_t i = 0; i < count; ++i) {
        grid[i] = count == 1 ? lo : lo + (hi - lo) * double(i) / double(count - 1);
    }
    return grid;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
    std::vector<double> values;
    for (const auto& piece : split(text, ',')) values.push_back(parse_double(piece, flag));
    return values;
}

// ----------------------------------------------------------------------------
// --config overlay.  The file is a flat JSON object keyed by long flag names
// (without the leading dashes); unknown keys are rejected to catch typos.
// ----------------------------------------------------------------------------

void apply_config_file(CliConfig& cfg, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("config: cannot open '" + path + "'");
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw DataError("config: invalid JSON in '" + path + "': " + e.what());
    }
    if (!doc.is_object()) throw DataError("config: top level must be a JSON object");

    auto str = [&](const ordered_json& v, const std::string& key) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number() || v.is_boolean()) return v.dump();
        throw DataError("config: key '" + key + "' must be a string or number");
    };

    for (const auto& [key, value] : doc.items()) {
        if (key == "input") cfg.input_csv = str(value, key);
        else if (key == "generator") cfg.generator = str(value, key);
        else if (key == "setting") cfg.setting = str(value, key);
        else if (key == "n") cfg.n = value.get<std::int64_t>();
        else if (key == "assign-p") cfg.assign_p = value.get<double>();
        else if (key == "covariates") cfg.covariates = str(value, key);
        else if (key == "treatment-column") cfg.treatment_column = str(value, key);
        else if (key == "outcome-column") cfg.outcome_column = str(value, key);
        else if (key == "kernel") cfg.kernel = str(value, key);
        else if (key == "bandwidth") cfg.bandwidth = str(value, key);
        else if (key == "l-kernel") cfg.l_kernel = str(value, key);
        else if (key == "l-bandwidth") cfg.l_bandwidth = str(value, key);
        else if (key == "lambda") cfg.lambda = str(value, key);
        else if (key == "permutations") cfg.permutations = value.get<std::int64_t>();
        else if (key == "alpha") cfg.alpha = value.get<double>();
        else if (key == "propensity") cfg.propensity = str(value, key);
        else if (key == "klr-ridge") cfg.klr_ridge = value.get<double>();
        else if (key == "clip") cfg.clip = value.get<double>();
        else if (key == "max-redraws") cfg.max_redraws = value.get<std::int64_t>();
        else if (key == "x-grid") cfg.x_grid = str(value, key);
        else if (key == "y-grid") cfg.y_grid = str(value, key);
        else if (key == "x-at") cfg.x_at = str(value, key);
        else if (key == "x-coord") cfg.x_coord = value.get<std::int64_t>();
        else if (key == "quantity") {
            cfg.quantities.clear();
            if (value.is_array()) {
                for (const auto& q : value) cfg.quantities.push_back(q.get<std::string>());
            } else {
                cfg.quantities.push_back(str(value, key));
            }
        }
        else if (key == "reps") cfg.reps = value.get<std::int64_t>();
        else if (key == "truth") cfg.truth_path = str(value, key);
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else if (key == "out") cfg.out = str(value, key);
        else throw DataError("config: unknown key '" + key + "'");
    }
}

// ----------------------------------------------------------------------------
// Input resolution.
// ----------------------------------------------------------------------------

std::vector<std::string> resolve_covariate_columns(const CliConfig& cfg) {
    if (cfg.covariates != "auto") {
        auto names = split(cfg.covariates, ',');
        if (names.empty()) throw ArgumentError("covariates: empty column list");
        return names;
    }
    // Auto mode mirrors dataset_to_csv naming: a single "x", else x0..x{d-1}.
    std::ifstream in(cfg.input_csv, std::ios::binary);
    if (!in) throw DataError("load_csv: cannot open '" + cfg.input_csv + "'");
    std::string header;
    if (!std::getline(in, header)) throw DataError("load_csv: '" + cfg.input_csv + "' is empty");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const auto columns = split(header, ',');
    std::vector<std::pair<std::int64_t, std::string>> indexed;
    for (const auto& name : columns) {
        if (name == "x") return {"x"};
        if (name.size() > 1 && name[0] == 'x' &&
            name.find_first_not_of("0123456789", 1) == std::string::npos) {
            indexed.emplace_back(parse_int(name.substr(1), "covariates"), name);
        }
    }
    std::sort(indexed.begin(), indexed.end());
    std::vector<std::string> names;
    names.reserve(indexed.size());
    for (const auto& [idx, name] : indexed) names.push_back(name);
    if (names.empty()) {
        throw DataError("covariates: no 'x'/'x<i>' columns in '" + cfg.input_csv +
                        "'; pass --covariates");
    }
    return names;
}

struct ResolvedInput {
    data::Dataset dataset;
    std::optional<data::SyntheticDataset> synthetic;
    ordered_json desc;
};

ResolvedInput resolve_input(const CliConfig& cfg, std::uint64_t seed) {
    const bool has_csv = !cfg.input_csv.empty();
    const bool has_gen = !cfg.generator.empty();
    if (has_csv == has_gen) {
        throw ArgumentError("input: pass exactly one of --input or --generator");
    }

    ResolvedInput resolved;
    if (has_gen) {
        if (!(cfg.n >= 2)) throw ArgumentError("n: need at least 2 rows, got " + std::to_string(cfg.n));
        if (cfg.generator == "toy") {
            resolved.synthetic = data::gen_toy(cfg.n, cfg.assign_p, seed);
        } else if (cfg.generator == "ihdp") {
            resolved.synthetic = data::gen_ihdp_like(cfg.n, data::setting_from_name(cfg.setting),
                                                     seed, data::AssignmentSpec::constant(cfg.assign_p));
        } else {
            throw ArgumentError("generator: expected 'toy' or 'ihdp', got '" + cfg.generator + "'");
        }
        resolved.dataset = resolved.synthetic->base;
        resolved.desc["mode"] = "generator";
        resolved.desc["generator"] = cfg.generator;
        if (cfg.generator == "ihdp") resolved.desc["setting"] = cfg.setting;
        resolved.desc["n"] = cfg.n;
        resolved.desc["assign_p"] = cfg.assign_p;
    } else {
        const auto columns = resolve_covariate_columns(cfg);
        resolved.dataset =
            data::load_csv(cfg.input_csv, columns, cfg.treatment_column, cfg.outcome_column);
        resolved.desc["mode"] = "csv";
        resolved.desc["path"] = cfg.input_csv;
        resolved.desc["covariates"] = columns;
        resolved.desc["treatment_column"] = cfg.treatment_column;
        resolved.desc["outcome_column"] = cfg.outcome_column;
    }
    return resolved;
}

// ----------------------------------------------------------------------------
// Kernel / lambda / propensity resolution.
// ----------------------------------------------------------------------------

kernels::KernelSpec resolve_kernel(const std::string& family, const std::string& bandwidth,
                                   const Matrix& points, const std::string& flag,
                                   ordered_json& desc) {
    kernels::KernelSpec spec;
    spec.family = kernels::family_from_name(family);
    if (spec.family == kernels::Family::linear) {
        spec.bandwidth = 1.0;
    } else if (bandwidth == "median") {
        spec.bandwidth = kernels::median_heuristic(points);
    } else {
        spec.bandwidth = parse_double(bandwidth, flag);
    }
    kernels::validate(spec);
    desc["family"] = family;
    desc["bandwidth"] = bandwidth;
    desc["resolved_bandwidth"] = spec.bandwidth;
    return spec;
}

const std::vector<double> kLambdaGrid = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0};

// Per-group regularization for the embedding-based commands: a fixed value or
// 5-fold cross-validation on the held-out embedding loss.
std::pair<double, double> resolve_lambda_cme(const CliConfig& cfg, const data::Dataset& ds,
                                             const kernels::KernelSpec& k_spec,
                                             const kernels::KernelSpec& l_spec,
                                             ordered_json& desc) {
    desc["requested"] = cfg.lambda;
    double lam0 = 0.0, lam1 = 0.0;
    if (cfg.lambda == "cv") {
        lam0 = cme::select_lambda(ds.group_X(0), ds.group_y(0), k_spec, l_spec, kLambdaGrid, 5);
        lam1 = cme::select_lambda(ds.group_X(1), ds.group_y(1), k_spec, l_spec, kLambdaGrid, 5);
    } else {
        lam0 = lam1 = parse_double(cfg.lambda, "lambda");
    }
    desc["resolved"] = {lam0, lam1};
    return {lam0, lam1};
}

double resolve_lambda_fixed(const CliConfig& cfg, ordered_json& desc) {
    if (cfg.lambda == "cv") {
        throw ArgumentError(
            "lambda: 'cv' applies to the embedding-based commands; pass a numeric value");
    }
    const double lam = parse_double(cfg.lambda, "lambda");
    desc["requested"] = cfg.lambda;
    desc["resolved"] = {lam, lam};
    return lam;
}

kcd::PropensitySpec resolve_propensity(const CliConfig& cfg) {
    if (cfg.propensity == "klr") return kcd::PropensitySpec::klr(cfg.klr_ridge, cfg.clip);
    if (cfg.propensity.rfind("const:", 0) == 0) {
        return kcd::PropensitySpec::constant(parse_double(cfg.propensity.substr(6), "propensity"));
    }
    if (cfg.propensity.rfind("known:", 0) == 0) {
        const std::string column = cfg.propensity.substr(6);
        if (column.empty()) throw ArgumentError("propensity: known:<column> needs a column name");
        if (cfg.input_csv.empty()) {
            throw ArgumentError("propensity: known:<column> requires --input CSV");
        }
        const auto columns = resolve_covariate_columns(cfg);
        const auto with_e =
            data::load_csv(cfg.input_csv, columns, cfg.treatment_column, column);
        return kcd::PropensitySpec::known(with_e.y, cfg.clip);
    }
    throw ArgumentError("propensity: expected klr, known:<column>, or const:<p>, got '" +
                        cfg.propensity + "'");
}

// ----------------------------------------------------------------------------
// Evaluation points: the x-grid sweeps one coordinate of a base point.
// ----------------------------------------------------------------------------

Matrix build_x_points(const CliConfig& cfg, const data::Dataset& ds, const Vector& grid,
                      ordered_json& desc) {
    const Eigen::Index d = ds.d();
    if (cfg.x_coord < 0 || cfg.x_coord >= d) {
        throw ArgumentError("x-coord: must be in [0, " + std::to_string(d) + "), got " +
                            std::to_string(cfg.x_coord));
    }
    Vector base = Vector::Zero(d);
    if (!cfg.x_at.empty()) {
        const auto values = parse_double_list(cfg.x_at, "x-at");
        if (Eigen::Index(values.size()) != d) {
            throw ArgumentError("x-at: expected " + std::to_string(d) + " coordinates, got " +
                                std::to_string(values.size()));
        }
        for (Eigen::Index j = 0; j < d; ++j) base[j] = values[j];
    } else if (d > 1) {
        base = ds.X.colwise().mean();  // documented default: hold at column means
    }

    Matrix points(grid.size(), d);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        points.row(i) = base.transpose();
        points(i, cfg.x_coord) = grid[i];
    }
    desc["x_grid"] = cfg.x_grid;
    desc["x_coord"] = cfg.x_coord;
    std::vector<double> base_vec(base.data(), base.data() + base.size());
    desc["x_base"] = base_vec;
    return points;
}

// ----------------------------------------------------------------------------
// Artifacts.
// ----------------------------------------------------------------------------

fs::path atomic_write(const CliConfig& cfg, const std::string& name, const std::string& content) {
    if (cfg.out.empty()) throw ArgumentError("out: pass --out <directory>");
    const fs::path dir(cfg.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("out: cannot create '" + dir.string() + "': " + ec.message());
    const fs::path tmp = dir / (name + ".tmp");
    const fs::path final_path = dir / name;
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) throw DataError("out: failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, final_path, ec);
    if (ec) throw DataError("out: cannot rename into '" + final_path.string() + "': " + ec.message());
    return final_path;
}

ordered_json base_config(const CliConfig& cfg, const ordered_json& input_desc) {
    ordered_json config;
    config["command"] = cfg.command;
    config["input"] = input_desc;
    config["seed"] = cfg.seed;
    config["out"] = cfg.out;
    return config;
}

ordered_json report_skeleton(const CliConfig& cfg, ordered_json config) {
    ordered_json report;
    report["version"] = kVersion;
    report["seed"] = cfg.seed;
    report["config"] = std::move(config);
    return report;
}

// ----------------------------------------------------------------------------
// Quantities for ustat/evaluate: name -> U-statistic kernel + transform.
// ----------------------------------------------------------------------------

struct QuantitySpec {
    std::string name;
    ustat::UStatKernel h;
    bool sqrt_transform = false;  // std = sqrt of the variance surface
};

QuantitySpec parse_quantity(const std::string& name) {
    if (name == "mean") return {name, ustat::UStatKernel::mean(), false};
    if (name == "std") return {name, ustat::UStatKernel::variance(), true};
    if (name == "gini") return {name, ustat::UStatKernel::gini(), false};
    if (name.rfind("cdf:", 0) == 0) {
        return {name, ustat::UStatKernel::cdf_at(parse_double(name.substr(4), "quantity")), false};
    }
    if (name.rfind("moment:", 0) == 0) {
        const std::int64_t k = parse_int(name.substr(7), "quantity");
        if (k < 1 || k > 8) throw ArgumentError("quantity: moment order must be in [1, 8]");
        return {name, ustat::UStatKernel::raw_moment(int(k)), false};
    }
    throw ArgumentError("quantity: expected mean, std, gini, cdf:<y*>, or moment:<k>, got '" +
                        name + "'");
}

std::vector<std::string> effective_quantities(const CliConfig& cfg) {
    if (cfg.quantities.empty()) return {"mean", "std"};
    return cfg.quantities;
}

// Conditional truth of a quantity under a synthetic law (both laws have
// Gaussian conditionals, so every supported quantity has a closed form).
double truth_quantity(const data::SyntheticTruth& truth, int group, const Vector& x,
                      const QuantitySpec& q) {
    const double m = group == 0 ? truth.cond_mean0(x) : truth.cond_mean1(x);
    const double s = group == 0 ? truth.cond_std0(x) : truth.cond_std1(x);
    if (q.name == "mean") return m;
    if (q.name == "std") return s;
    if (q.name == "gini") return 2.0 * s / std::sqrt(M_PI);  // E|Y-Y'|, Y,Y' iid N(m,s²)
    if (q.name.rfind("cdf:", 0) == 0) {
        const double y_star = parse_double(q.name.substr(4), "quantity");
        return 0.5 * std::erfc(-(y_star - m) / (s * std::sqrt(2.0)));
    }
    // moment:k via M_k = m·M_{k-1} + (k-1)·s²·M_{k-2}
    const std::int64_t order = parse_int(q.name.substr(7), "quantity");
    double prev = 1.0, cur = m;
    for (std::int64_t k = 2; k <= order; ++k) {
        const double next = m * cur + double(k - 1) * s * s * prev;
        prev = cur;
        cur = next;
    }
    return order == 0 ? 1.0 : cur;
}

// ----------------------------------------------------------------------------
// Ground-truth MMD between the two Gaussian conditionals at x, by composite
// Simpson quadrature of E l(A,B) over the difference D = A - B (the kernel
// profiles depend on a - b only).
// ----------------------------------------------------------------------------

double expected_profile(const kernels::KernelSpec& l_spec, double mu, double var) {
    auto profile = [&](double dist) {
        const double s2 = l_spec.bandwidth * l_spec.bandwidth;
        switch (l_spec.family) {
            case kernels::Family::gaussian: return std::exp(-dist * dist / s2);
            case kernels::Family::laplacian: return std::exp(-std::fabs(dist) / s2);
            case kernels::Family::linear: return 0.0;  // handled by caller
        }
        return 0.0;
    };
    if (var < 1e-12) return profile(mu);
    const double sd = std::sqrt(var);
    const int panels = 2000;
    const double lo = mu - 12.0 * sd;
    const double step = 24.0 * sd / (2 * panels);
    auto integrand = [&](double d) {
        const double z = (d - mu) / sd;
        return profile(d) * std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
    };
    double acc = integrand(lo) + integrand(lo + 2 * panels * step);
    for (int i = 1; i < 2 * panels; ++i) acc += integrand(lo + i * step) * (i % 2 ? 4.0 : 2.0);
    return acc * step / 3.0;
}

double truth_mmd(const data::SyntheticTruth& truth, const kernels::KernelSpec& l_spec,
                 const Vector& x) {
    const double m0 = truth.cond_mean0(x), s0 = truth.cond_std0(x);
    const double m1 = truth.cond_mean1(x), s1 = truth.cond_std1(x);
    if (l_spec.family == kernels::Family::linear) {
        return std::fabs(m0 - m1);  // MMD² = (E A - E B)² for the linear kernel
    }
    const double mmd_sq = expected_profile(l_spec, 0.0, 2.0 * s0 * s0) +
                          expected_profile(l_spec, 0.0, 2.0 * s1 * s1) -
                          2.0 * expected_profile(l_spec, m0 - m1, s0 * s0 + s1 * s1);
    return std::sqrt(std::max(0.0, mmd_sq));
}

// ----------------------------------------------------------------------------
// Subcommand: test
// ----------------------------------------------------------------------------

int run_test(const CliConfig& cfg) {
    auto input = resolve_input(cfg, cfg.seed);
    const auto& ds = input.dataset;
    ds.validate();

    ordered_json k_desc, l_desc, lambda_desc;
    const auto k_spec = resolve_kernel(cfg.kernel, cfg.bandwidth, ds.X, "bandwidth", k_desc);
    Matrix y_points(ds.n(), 1);
    y_points.col(0) = ds.y;
    const auto l_spec =
        resolve_kernel(cfg.l_kernel, cfg.l_bandwidth, y_points, "l-bandwidth", l_desc);
    const auto [lam0, lam1] = resolve_lambda_cme(cfg, ds, k_spec, l_spec, lambda_desc);

    kcd::KcdOptions options;
    options.k_spec = k_spec;
    options.l_spec = l_spec;
    options.lambda0 = lam0;
    options.lambda1 = lam1;
    options.permutations = int(cfg.permutations);
    options.alpha = cfg.alpha;
    options.seed = cfg.seed;
    options.propensity = resolve_propensity(cfg);
    options.max_redraws = int(cfg.max_redraws);

    const auto result = kcd::kcd_test(ds, options);

    ordered_json config = base_config(cfg, input.desc);
    config["kernel"] = k_desc;
    config["l_kernel"] = l_desc;
    config["lambda"] = lambda_desc;
    config["test"] = {{"permutations", cfg.permutations},
                      {"alpha", cfg.alpha},
                      {"propensity", cfg.propensity},
                      {"klr_ridge", cfg.klr_ridge},
                      {"clip", cfg.clip},
                      {"max_redraws", cfg.max_redraws}};

    ordered_json report = report_skeleton(cfg, std::move(config));
    report["result"] = ordered_json::parse(kcd::result_to_json(result));
    const auto path = atomic_write(cfg, "test_report.json", report.dump(2) + "\n");
    std::cout << "wrote " << path.string() << " (p_value=" << result.p_value
              << ", rejected=" << (result.rejected ? "true" : "false") << ")\n";
    return 0;
}

// ----------------------------------------------------------------------------
// Subcommand: witness
// ----------------------------------------------------------------------------

int run_witness(const CliConfig& cfg) {
    auto input = resolve_input(cfg, cfg.seed);
    const auto& ds = input.dataset;
    ds.validate();

    ordered_json k_desc, l_desc, lambda_desc, grid_desc;
    const auto k_spec = resolve_kernel(cfg.kernel, cfg.bandwidth, ds.X, "bandwidth", k_desc);
    Matrix y_points(ds.n(), 1);
    y_points.col(0) = ds.y;
    const auto l_spec =
        resolve_kernel(cfg.l_kernel, cfg.l_bandwidth, y_points, "l-bandwidth", l_desc);
    const auto [lam0, lam1] = resolve_lambda_cme(cfg, ds, k_spec, l_spec, lambda_desc);

    const Vector x_values = parse_grid(cfg.x_grid, "x-grid");
    const Matrix x_points = build_x_points(cfg, ds, x_values, grid_desc);
    Vector y_values;
    if (cfg.y_grid == "auto") {
        const double lo = ds.y.minCoeff(), hi = ds.y.maxCoeff();
        y_values.resize(101);
        for (Eigen::Index i = 0; i < 101; ++i) y_values[i] = lo + (hi - lo) * double(i) / 100.0;
    } else {
        y_values = parse_grid(cfg.y_grid, "y-grid");
    }
    grid_desc["y_grid"] = cfg.y_grid;
    grid_desc["resolved_y_grid"] = {{"lo", y_values.size() ? y_values.minCoeff() : 0.0},
                                    {"hi", y_values.size() ? y_values.maxCoeff() : 0.0},
                                    {"count", y_values.size()}};

    const auto m0 = cme::fit_cme(ds.group_X(0), ds.group_y(0), k_spec, l_spec, lam0);
    const auto m1 = cme::fit_cme(ds.group_X(1), ds.group_y(1), k_spec, l_spec, lam1);
    const auto grid = cme::witness_grid(m0, m1, x_points, y_values);

    ordered_json config = base_config(cfg, input.desc);
    config["kernel"] = k_desc;
    config["l_kernel"] = l_desc;
    config["lambda"] = lambda_desc;
    config["witness"] = grid_desc;

    ordered_json report = report_skeleton(cfg, std::move(config));
    report["artifact"] = "witness.csv";
    report["rows"] = grid.values.rows();
    report["cols"] = grid.values.cols();
    const auto csv_path = atomic_write(cfg, "witness.csv", cme::witness_grid_to_csv(grid));
    const auto report_path = atomic_write(cfg, "witness_report.json", report.dump(2) + "\n");
    std::cout << "wrote " << csv_path.string() << " and " << report_path.string() << "\n";
    return 0;
}

// ----------------------------------------------------------------------------
// Subcommand: ustat
// ----------------------------------------------------------------------------

int run_ustat(const CliConfig& cfg) {
    auto input = resolve_input(cfg, cfg.seed);
    const auto& ds = input.dataset;
    ds.validate();

    ordered_json k_desc, lambda_desc, grid_desc;
    const auto k_spec = resolve_kernel(cfg.kernel, cfg.bandwidth, ds.X, "bandwidth", k_desc);
    const double lam = resolve_lambda_fixed(cfg, lambda_desc);
    const Vector x_values = parse_grid(cfg.x_grid, "x-grid");
    const Matrix x_points = build_x_points(cfg, ds, x_values, grid_desc);
    const auto names = effective_quantities(cfg);

    std::vector<ustat::UStatCurve> curves;
    for (const auto& name : names) {
        const auto q = parse_quantity(name);
        for (int group = 0; group < 2; ++group) {
            if (x_values.size() == 0) continue;  // empty grid: header-only artifact
            const auto model = ustat::fit_ustat_regression(ds.group_X(group), ds.group_y(group),
                                                           q.h, k_spec, lam);
            Vector estimates(x_values.size());
            for (Eigen::Index i = 0; i < x_points.rows(); ++i) {
                const Vector x = x_points.row(i).transpose();
                estimates[i] =
                    q.sqrt_transform ? ustat::conditional_std(model, x) : model.predict_diag(x);
            }
            curves.push_back({x_values, estimates,
                              group == 0 ? cme::group_name(cme::Group::control)
                                         : cme::group_name(cme::Group::treatment),
                              name});
        }
    }

    ordered_json config = base_config(cfg, input.desc);
    config["kernel"] = k_desc;
    config["lambda"] = lambda_desc;
    config["ustat"] = grid_desc;
    config["ustat"]["quantities"] = names;

    ordered_json report = report_skeleton(cfg, std::move(config));
    report["artifact"] = "ustat_curves.csv";
    report["curves"] = curves.size();
    const auto csv_path = atomic_write(cfg, "ustat_curves.csv", ustat::curves_to_csv(curves));
    const auto report_path = atomic_write(cfg, "ustat_report.json", report.dump(2) + "\n");
    std::cout << "wrote " << csv_path.string() << " and " << report_path.string() << "\n";
    return 0;
}

// ----------------------------------------------------------------------------
// Subcommand: simulate
// ----------------------------------------------------------------------------

int run_simulate(const CliConfig& cfg) {
    if (cfg.generator.empty()) throw ArgumentError("simulate: pass --generator toy|ihdp");
    auto input = resolve_input(cfg, cfg.seed);
    const auto& synthetic = *input.synthetic;

    ordered_json config = base_config(cfg, input.desc);
    ordered_json sidecar = report_skeleton(cfg, std::move(config));
    sidecar["truth"] = ordered_json::parse(data::truth_to_json(synthetic.truth));

    const auto csv_path = atomic_write(
        cfg, "dataset.csv", data::dataset_to_csv(synthetic.base, &synthetic.y0, &synthetic.y1));
    const auto truth_path = atomic_write(cfg, "truth.json", sidecar.dump(2) + "\n");
    std::cout << "wrote " << csv_path.string() << " and " << truth_path.string() << "\n";
    return 0;
}

// ----------------------------------------------------------------------------
// Subcommand: evaluate
// ----------------------------------------------------------------------------

data::SyntheticTruth load_truth_sidecar(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("truth: cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    // Accept both a bare truth object and the simulate sidecar that wraps it.
    try {
        const auto doc = ordered_json::parse(text);
        if (doc.is_object() && doc.contains("truth")) {
            return data::truth_from_json(doc["truth"].dump());
        }
    } catch (const std::exception&) {
        // fall through to the bare parse, which reports the real error
    }
    return data::truth_from_json(text);
}

struct MetricSeries {
    std::vector<double> pehde;
    std::vector<double> rmse;
};

ordered_json stat_block(const std::vector<double>& values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double stderr_ =
        values.size() > 1 ? std::sqrt(var / double(values.size() - 1) / double(values.size()))
                          : 0.0;
    ordered_json block;
    block["mean"] = mean;
    block["stderr"] = stderr_;
    block["per_rep"] = values;
    return block;
}

int run_evaluate(const CliConfig& cfg) {
    if (cfg.reps < 1) throw ArgumentError("reps: must be >= 1, got " + std::to_string(cfg.reps));
    const bool csv_mode = !cfg.input_csv.empty();
    if (csv_mode && cfg.reps != 1) {
        throw ArgumentError("reps: CSV input provides a single realization; use --reps 1");
    }
    if (csv_mode && cfg.truth_path.empty()) {
        throw ArgumentError("truth: CSV input needs --truth <sidecar.json>");
    }

    const auto names = effective_quantities(cfg);
    const bool wants_mmd =
        std::find(names.begin(), names.end(), std::string("mmd")) != names.end();

    ordered_json k_desc, l_desc, lambda_desc, input_desc;
    // metric key -> series; key order fixed by the quantity list then group
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& name : names) {
        if (name == "mmd") {
            keys.emplace_back(name, "pair");
        } else {
            keys.emplace_back(name, cme::group_name(cme::Group::control));
            keys.emplace_back(name, cme::group_name(cme::Group::treatment));
        }
    }
    std::vector<MetricSeries> series(keys.size());

    for (std::int64_t rep = 0; rep < cfg.reps; ++rep) {
        const std::uint64_t rep_seed = cfg.seed + std::uint64_t(rep);
        auto input = resolve_input(cfg, rep_seed);
        const auto& ds = input.dataset;
        ds.validate();
        const data::SyntheticTruth truth =
            csv_mode ? load_truth_sidecar(cfg.truth_path) : input.synthetic->truth;

        ordered_json k_tmp, l_tmp, lam_tmp;
        const auto k_spec = resolve_kernel(cfg.kernel, cfg.bandwidth, ds.X, "bandwidth", k_tmp);
        Matrix y_points(ds.n(), 1);
        y_points.col(0) = ds.y;
        const auto l_spec =
            resolve_kernel(cfg.l_kernel, cfg.l_bandwidth, y_points, "l-bandwidth", l_tmp);
        double lam0 = 0.0, lam1 = 0.0;
        if (wants_mmd || cfg.lambda == "cv") {
            std::tie(lam0, lam1) = resolve_lambda_cme(cfg, ds, k_spec, l_spec, lam_tmp);
        } else {
            lam0 = lam1 = resolve_lambda_fixed(cfg, lam_tmp);
        }
        if (rep == 0) {
            k_desc = k_tmp;
            l_desc = l_tmp;
            lambda_desc = lam_tmp;
            input_desc = input.desc;
        }

        // Estimates vs truth at the pooled covariate rows of this repetition.
        const Matrix& points = ds.X;
        std::size_t key_index = 0;
        for (const auto& name : names) {
            if (name == "mmd") {
                const auto m0 = cme::fit_cme(ds.group_X(0), ds.group_y(0), k_spec, l_spec, lam0);
                const auto m1 = cme::fit_cme(ds.group_X(1), ds.group_y(1), k_spec, l_spec, lam1);
                const cme::CmePair pair(m0, m1);
                Vector est(points.rows()), tru(points.rows());
                for (Eigen::Index i = 0; i < points.rows(); ++i) {
                    const Vector x = points.row(i).transpose();
                    est[i] = pair.mmd(x);
                    tru[i] = truth_mmd(truth, l_spec, x);
                }
                series[key_index].pehde.push_back(data::pehde(est, tru));
                series[key_index].rmse.push_back(data::rmse(est, tru));
                ++key_index;
                continue;
            }
            const auto q = parse_quantity(name);
            for (int group = 0; group < 2; ++group) {
                const auto model = ustat::fit_ustat_regression(
                    ds.group_X(group), ds.group_y(group), q.h, k_spec,
                    group == 0 ? lam0 : lam1);
                Vector est(points.rows()), tru(points.rows());
                for (Eigen::Index i = 0; i < points.rows(); ++i) {
                    const Vector x = points.row(i).transpose();
                    est[i] = q.sqrt_transform ? ustat::conditional_std(model, x)
                                              : model.predict_diag(x);
                    tru[i] = truth_quantity(truth, group, x, q);
                }
                series[key_index].pehde.push_back(data::pehde(est, tru));
                series[key_index].rmse.push_back(data::rmse(est, tru));
                ++key_index;
            }
        }
    }

    ordered_json config = base_config(cfg, input_desc);
    config["kernel"] = k_desc;
    config["l_kernel"] = l_desc;
    config["lambda"] = lambda_desc;
    config["evaluate"] = {{"reps", cfg.reps}, {"quantities", names}};
    if (csv_mode) config["evaluate"]["truth"] = cfg.truth_path;

    ordered_json report = report_skeleton(cfg, std::move(config));
    report["reps"] = cfg.reps;
    report["metrics"] = ordered_json::array();
    for (std::size_t i = 0; i < keys.size(); ++i) {
        ordered_json entry;
        entry["quantity"] = keys[i].first;
        entry["group"] = keys[i].second;
        entry["pehde"] = stat_block(series[i].pehde);
        entry["rmse"] = stat_block(series[i].rmse);
        report["metrics"].push_back(std::move(entry));
    }
    const auto path = atomic_write(cfg, "evaluate_report.json", report.dump(2) + "\n");
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

// ----------------------------------------------------------------------------
// Argument wiring.
// ----------------------------------------------------------------------------

void add_input_options(CLI::App* sub, CliConfig& cfg) {
    sub->add_option("--input", cfg.input_csv, "input dataset CSV");
    sub->add_option("--generator", cfg.generator, "synthetic generator: toy|ihdp");
    sub->add_option("--setting", cfg.setting, "ihdp noise setting: SN|LN|HN");
    sub->add_option("--n", cfg.n, "generator sample size");
    sub->add_option("--assign-p", cfg.assign_p, "generator treatment probability");
    sub->add_option("--covariates", cfg.covariates, "CSV covariate columns (comma list or auto)");
    sub->add_option("--treatment-column", cfg.treatment_column, "CSV treatment column");
    sub->add_option("--outcome-column", cfg.outcome_column, "CSV outcome column");
    sub->add_option("--config", cfg.config_path, "JSON config file (flags override it)");
    sub->add_option("--seed", cfg.seed, "master seed");
    sub->add_option("--out", cfg.out, "output directory");
}

void add_kernel_options(CLI::App* sub, CliConfig& cfg, bool with_l) {
    sub->add_option("--kernel", cfg.kernel, "covariate kernel: gaussian|laplacian|linear");
    sub->add_option("--bandwidth", cfg.bandwidth, "covariate bandwidth: median|<value>");
    if (with_l) {
        sub->add_option("--l-kernel", cfg.l_kernel, "outcome kernel: gaussian|laplacian|linear");
        sub->add_option("--l-bandwidth", cfg.l_bandwidth, "outcome bandwidth: median|<value>");
    }
    sub->add_option("--lambda", cfg.lambda, "regularization: <value>|cv");
}

void add_grid_options(CLI::App* sub, CliConfig& cfg) {
    sub->add_option("--x-grid", cfg.x_grid, "covariate grid <lo>:<hi>:<count>");
    sub->add_option("--x-at", cfg.x_at, "base point coordinates (comma list, d > 1)");
    sub->add_option("--x-coord", cfg.x_coord, "coordinate swept by --x-grid");
}

}  // namespace

int main(int argc, char** argv) {
    CliConfig cfg;
    CLI::App app{"conditional distributional treatment effects: kernel test, witness surfaces, "
                 "U-statistic regression curves, and synthetic benchmarks"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    auto* test = app.add_subcommand("test", "permutation test of equal conditional laws");
    add_input_options(test, cfg);
    add_kernel_options(test, cfg, true);
    test->add_option("--permutations", cfg.permutations, "label redraws");
    test->add_option("--alpha", cfg.alpha, "rejection level");
    test->add_option("--propensity", cfg.propensity, "klr | known:<column> | const:<p>");
    test->add_option("--klr-ridge", cfg.klr_ridge, "KLR penalty");
    test->add_option("--clip", cfg.clip, "propensity clipping epsilon");
    test->add_option("--max-redraws", cfg.max_redraws, "single-class redraw budget");

    auto* witness = app.add_subcommand("witness", "conditional witness surface");
    add_input_options(witness, cfg);
    add_kernel_options(witness, cfg, true);
    add_grid_options(witness, cfg);
    witness->add_option("--y-grid", cfg.y_grid, "outcome grid <lo>:<hi>:<count> or auto");

    auto* ustat_cmd = app.add_subcommand("ustat", "conditional U-statistic curves");
    add_input_options(ustat_cmd, cfg);
    add_kernel_options(ustat_cmd, cfg, false);
    add_grid_options(ustat_cmd, cfg);
    ustat_cmd->add_option("--quantity", cfg.quantities,
                          "mean | std | gini | cdf:<y*> | moment:<k> (repeatable)")
        ->delimiter(',');

    auto* simulate = app.add_subcommand("simulate", "write a synthetic dataset + truth sidecar");
    add_input_options(simulate, cfg);

    auto* evaluate = app.add_subcommand("evaluate", "PEHDE/RMSE report over repetitions");
    add_input_options(evaluate, cfg);
    add_kernel_options(evaluate, cfg, true);
    evaluate->add_option("--quantity", cfg.quantities,
                         "mean | std | gini | cdf:<y*> | moment:<k> | mmd (repeatable)")
        ->delimiter(',');
    evaluate->add_option("--reps", cfg.reps, "seeded repetitions");
    evaluate->add_option("--truth", cfg.truth_path, "truth sidecar for CSV input");

    // Overlay the config file before parsing so flags override file values.
    try {
        for (int i = 1; i < argc; ++i) {
            const std::string arg = argv[i];
            if (arg == "--config" && i + 1 < argc) {
                apply_config_file(cfg, argv[i + 1]);
                break;
            }
            if (arg.rfind("--config=", 0) == 0) {
                apply_config_file(cfg, arg.substr(9));
                break;
            }
        }
    } catch (const std::exception& e) {
        ordered_json diag;
        diag["error"] = {{"type", "config"}, {"message", e.what()}};
        std::cerr << diag.dump() << "\n";
        return 2;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (test->parsed()) {
            cfg.command = "test";
            return run_test(cfg);
        }
        if (witness->parsed()) {
            cfg.command = "witness";
            return run_witness(cfg);
        }
        if (ustat_cmd->parsed()) {
            cfg.command = "ustat";
            return run_ustat(cfg);
        }
        if (simulate->parsed()) {
            cfg.command = "simulate";
            return run_simulate(cfg);
        }
        cfg.command = "evaluate";
        return run_evaluate(cfg);
    } catch (const ArgumentError& e) {
        ordered_json diag;
        diag["error"] = {{"type", "argument"}, {"message", e.what()}};
        std::cerr << diag.dump() << "\n";
        return 2;
    } catch (const DataError& e) {
        ordered_json diag;
        diag["error"] = {{"type", "data"}, {"message", e.what()}};
        std::cerr << diag.dump() << "\n";
        return 2;
    } catch (const DegenerateInputError& e) {
        ordered_json diag;
        diag["error"] = {{"type", "degenerate_input"}, {"message", e.what()}};
        std::cerr << diag.dump() << "\n";
        return 2;
    } catch (const NumericError& e) {
        ordered_json diag;
        diag["error"] = {{"type", "numeric"}, {"message", e.what()}};
        std::cerr << diag.dump() << "\n";
        return 3;
    } catch (const std::exception& e) {
        ordered_json diag;
        diag["error"] = {{"type", "internal"}, {"message", e.what()}};
        std::cerr << diag.dump() << "\n";
        return 3;
    }
}
