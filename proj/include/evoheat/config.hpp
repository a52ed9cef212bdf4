#pragma once

// Experiment configuration: JSON with a fixed schema, validated on load.
//
// {
//   "name": "static_circle",
//   "model": {"kind": "scaled_circle" | "static_circle" | "conformal_circle" | "shrinking_sphere",
//             "id": "...", "scale": [c0, c1, ...], "log_scale": [term...], "potential": [term...],
//             "horizon": 1.0, "pole_margin": 1e-3},
//   "grid": {"s": [...], "t": [...], "p": [...], "q": [...], "r": [...], "points": [...],
//            "functions": [...], "checkpoints": [...]},
//   "overrides": {"<check id>": {<grid keys>}},
//   "checks": ["harnack_i", ...],
//   "lhs": "oracle" | "oracle_only" | "mc" | "both",
//   "estimator": {"n_paths": 20000, "dt": 1e-3, "seed": 1, "antithetic": false, "max_dt": 0.05},
//   "oracle": {"nodes": 512, "max_step": 1e-3},
//   "kernel": {"nodes": 256, "max_nodes": 512, "max_step": 2.5e-4, "resolution": 12, "row_stride": 1},
//   "logsob": {"p": 2, "q": 4, "inflation": 1.05, "sensitivity": [1.0, 1.2],
//              "beta_variant": "proof" | "statement", "beta_nodes": 5},
//   "workers": 1,
//   "output": {"dir": ".", "stem": "report", "format": "csv" | "json"}
// }
//
// A series term is {"mode": k, "cos": [a0, a1, ...], "sin": [b0, ...]}: the
// coefficient lists are polynomials in t. Grid points are standard angles
// (theta on circles, polar angle on the sphere); checkpoints are fractions of
// [s, t].

#include "evoheat/constants.hpp"
#include "evoheat/errors.hpp"
#include "evoheat/estimators.hpp"
#include "evoheat/geometry.hpp"
#include "evoheat/oracle.hpp"
#include "evoheat/test_functions.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace evoheat {

using Json = nlohmann::json;

enum class CheckId {
    HarnackI,
    HarnackII,
    HarnackPlain,
    Gradient,
    KernelBound,
    KernelBoundCor1,
    KernelBoundCor2,
    LogSobSemigroup,
    LogSobMeasure,
    Supercontractivity,
    Duality,
    Martingale,
};

inline constexpr std::array<std::pair<CheckId, std::string_view>, 12> kCheckNames{{
    {CheckId::HarnackI, "harnack_i"},
    {CheckId::HarnackII, "harnack_ii"},
    {CheckId::HarnackPlain, "harnack_plain"},
    {CheckId::Gradient, "gradient"},
    {CheckId::KernelBound, "kernel_bound"},
    {CheckId::KernelBoundCor1, "kernel_bound_cor1"},
    {CheckId::KernelBoundCor2, "kernel_bound_cor2"},
    {CheckId::LogSobSemigroup, "logsob_semigroup"},
    {CheckId::LogSobMeasure, "logsob_measure"},
    {CheckId::Supercontractivity, "supercontractivity"},
    {CheckId::Duality, "duality"},
    {CheckId::Martingale, "martingale"},
}};

inline std::string to_string(CheckId id) {
    for (const auto& [k, name] : kCheckNames)
        if (k == id) return std::string(name);
    return "unknown";
}

inline CheckId parse_check_id(const std::string& name) {
    for (const auto& [k, n] : kCheckNames)
        if (n == name) return k;
    throw ConfigError("unknown check id: " + name);
}

/// oracle: reference solver, Monte Carlo where it cannot represent the data;
/// oracle_only: never Monte Carlo; mc: always Monte Carlo; both: one row each.
enum class LhsMode { Oracle, OracleOnly, MonteCarlo, Both };

struct ParameterGrid {
    std::vector<double> s{0.0};
    std::vector<double> t;
    std::vector<double> p{2.0};
    std::vector<double> q{4.0};
    std::vector<double> r{1.0};
    std::vector<double> points{0.0};
    std::vector<double> checkpoints{0.25, 0.5, 0.75, 1.0};
    std::vector<std::string> functions;
};

struct ModelSpec {
    std::string kind = "static_circle";
    std::string id;
    std::vector<double> scale{1.0};
    TrigSeries log_scale;
    TrigSeries potential;
    double horizon = 0.0;  // 0 selects the model default
    double pole_margin = 1e-3;

    [[nodiscard]] EvolvingModel build() const {
        if (kind == "static_circle") return EvolvingModel::static_circle(potential, horizon > 0.0 ? horizon : 1.0);
        if (kind == "scaled_circle")
            return EvolvingModel::scaled_circle(Polynomial(scale), potential, horizon > 0.0 ? horizon : 1.0);
        if (kind == "conformal_circle")
            return EvolvingModel::conformal_circle(log_scale, potential, horizon > 0.0 ? horizon : 1.0);
        if (kind == "shrinking_sphere")
            return EvolvingModel::shrinking_sphere(potential, horizon > 0.0 ? horizon : 0.5, pole_margin);
        throw ConfigError("unknown model kind: " + kind);
    }
};

struct KernelSettings {
    KernelOptions options;
    int row_stride = 1;
};

struct LogSobSettings {
    double p = 2.0;
    double q = 4.0;
    double inflation = 1.05;
    std::vector<double> sensitivity{1.0, 1.2};
    BetaVariant variant = BetaVariant::Proof;
    int beta_nodes = 5;
};

struct OutputSettings {
    std::string dir = ".";
    std::string stem = "report";
    std::string format = "csv";
};

struct ExperimentConfig {
    std::string name = "experiment";
    ModelSpec model;
    ParameterGrid grid;
    std::map<CheckId, ParameterGrid> overrides;
    std::vector<CheckId> checks;
    LhsMode lhs = LhsMode::Oracle;
    EstimatorSettings estimator;
    OracleOptions oracle;
    KernelSettings kernel;
    LogSobSettings logsob;
    unsigned workers = 1;
    OutputSettings output;

    [[nodiscard]] const ParameterGrid& grid_for(CheckId id) const {
        auto it = overrides.find(id);
        return it == overrides.end() ? grid : it->second;
    }

    [[nodiscard]] std::string model_id() const { return model.id.empty() ? model.kind : model.id; }
};

namespace detail {

inline void allow_keys(const Json& j, std::initializer_list<std::string_view> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

inline std::vector<double> number_list(const Json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw ConfigError(where + " must contain numbers only");
        out.push_back(v.get<double>());
    }
    return out;
}

inline TrigSeries parse_series(const Json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of terms");
    std::vector<TrigTerm> terms;
    for (const auto& term : j) {
        allow_keys(term, {"mode", "cos", "sin"}, where);
        TrigTerm tt;
        if (!term.contains("mode") || !term["mode"].is_number_integer() || term["mode"].get<int>() < 0)
            throw ConfigError(where + ": term needs a nonnegative integer mode");
        tt.mode = term["mode"].get<int>();
        if (term.contains("cos")) tt.cos_coeff = Polynomial(number_list(term["cos"], where + ".cos"));
        if (term.contains("sin")) tt.sin_coeff = Polynomial(number_list(term["sin"], where + ".sin"));
        terms.push_back(tt);
    }
    return TrigSeries(std::move(terms));
}

inline void apply_grid(const Json& j, ParameterGrid& g, const std::string& where) {
    allow_keys(j, {"s", "t", "p", "q", "r", "points", "functions", "checkpoints"}, where);
    if (j.contains("s")) g.s = number_list(j["s"], where + ".s");
    if (j.contains("t")) g.t = number_list(j["t"], where + ".t");
    if (j.contains("p")) g.p = number_list(j["p"], where + ".p");
    if (j.contains("q")) g.q = number_list(j["q"], where + ".q");
    if (j.contains("r")) g.r = number_list(j["r"], where + ".r");
    if (j.contains("points")) g.points = number_list(j["points"], where + ".points");
    if (j.contains("checkpoints")) g.checkpoints = number_list(j["checkpoints"], where + ".checkpoints");
    if (j.contains("functions")) {
        if (!j["functions"].is_array()) throw ConfigError(where + ".functions must be an array of ids");
        g.functions.clear();
        for (const auto& f : j["functions"]) {
            if (!f.is_string()) throw ConfigError(where + ".functions must contain strings");
            g.functions.push_back(f.get<std::string>());
        }
    }
}

inline void validate_grid(const ParameterGrid& g, const EvolvingModel& model, const std::string& where) {
    for (double v : g.s)
        if (!(v >= 0.0) || v >= model.horizon()) throw ConfigError(where + ": s outside [0, T)");
    for (double v : g.t)
        if (!(v > 0.0) || v >= model.horizon()) throw ConfigError(where + ": t outside (0, T)");
    for (double v : g.p)
        if (!(v > 1.0)) throw ConfigError(where + ": p must exceed 1");
    for (double v : g.q)
        if (!(v > 1.0)) throw ConfigError(where + ": q must exceed 1");
    for (double v : g.r)
        if (!(v > 0.0)) throw ConfigError(where + ": r must be positive");
    for (double v : g.checkpoints)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(where + ": checkpoints are fractions in [0, 1]");
    const double span = model.is_sphere() ? std::numbers::pi : kTwoPi;
    for (double v : g.points)
        if (!(v >= 0.0 && v <= span)) throw ConfigError(where + ": point outside the standard angle range");
    for (const auto& f : g.functions) (void)TestFunction::parse(f);
}

}  // namespace detail

inline void validate(const ExperimentConfig& c);

inline ExperimentConfig parse_config(const Json& j) {
    using detail::allow_keys;
    ExperimentConfig c;
    try {
        allow_keys(j, {"name", "model", "grid", "overrides", "checks", "lhs", "estimator", "oracle", "kernel", "logsob",
                       "workers", "output"},
                   "config");
        if (j.contains("name")) c.name = j["name"].get<std::string>();

        if (!j.contains("model")) throw ConfigError("config needs a model");
        const Json& m = j["model"];
        allow_keys(m, {"kind", "id", "scale", "log_scale", "potential", "horizon", "pole_margin"}, "model");
        if (m.contains("kind")) c.model.kind = m["kind"].get<std::string>();
        if (m.contains("id")) c.model.id = m["id"].get<std::string>();
        if (m.contains("scale")) c.model.scale = detail::number_list(m["scale"], "model.scale");
        if (m.contains("log_scale")) c.model.log_scale = detail::parse_series(m["log_scale"], "model.log_scale");
        if (m.contains("potential")) c.model.potential = detail::parse_series(m["potential"], "model.potential");
        if (m.contains("horizon")) c.model.horizon = m["horizon"].get<double>();
        if (m.contains("pole_margin")) c.model.pole_margin = m["pole_margin"].get<double>();
        const EvolvingModel model = c.model.build();

        if (j.contains("grid")) detail::apply_grid(j["grid"], c.grid, "grid");
        detail::validate_grid(c.grid, model, "grid");
        if (j.contains("overrides")) {
            if (!j["overrides"].is_object()) throw ConfigError("overrides must be an object keyed by check id");
            for (const auto& [key, value] : j["overrides"].items()) {
                const CheckId id = parse_check_id(key);
                ParameterGrid g = c.grid;
                detail::apply_grid(value, g, "overrides." + key);
                detail::validate_grid(g, model, "overrides." + key);
                c.overrides[id] = g;
            }
        }
        if (j.contains("checks")) {
            if (!j["checks"].is_array()) throw ConfigError("checks must be an array of ids");
            for (const auto& id : j["checks"]) c.checks.push_back(parse_check_id(id.get<std::string>()));
        }
        if (j.contains("lhs")) {
            const auto mode = j["lhs"].get<std::string>();
            if (mode == "oracle") {
                c.lhs = LhsMode::Oracle;
            } else if (mode == "oracle_only") {
                c.lhs = LhsMode::OracleOnly;
            } else if (mode == "mc") {
                c.lhs = LhsMode::MonteCarlo;
            } else if (mode == "both") {
                c.lhs = LhsMode::Both;
            } else {
                throw ConfigError("lhs must be oracle, oracle_only, mc or both");
            }
        }
        if (j.contains("estimator")) {
            const Json& e = j["estimator"];
            allow_keys(e, {"n_paths", "dt", "seed", "antithetic", "max_dt"}, "estimator");
            if (e.contains("n_paths")) c.estimator.n_paths = e["n_paths"].get<std::size_t>();
            if (e.contains("dt")) c.estimator.dt = e["dt"].get<double>();
            if (e.contains("seed")) c.estimator.seed = e["seed"].get<std::uint64_t>();
            if (e.contains("antithetic")) c.estimator.antithetic = e["antithetic"].get<bool>();
            if (e.contains("max_dt")) c.estimator.max_dt = e["max_dt"].get<double>();
        }
        if (j.contains("oracle")) {
            const Json& o = j["oracle"];
            allow_keys(o, {"nodes", "max_step"}, "oracle");
            if (o.contains("nodes")) c.oracle.nodes = o["nodes"].get<int>();
            if (o.contains("max_step")) c.oracle.max_step = o["max_step"].get<double>();
        }
        if (j.contains("kernel")) {
            const Json& k = j["kernel"];
            allow_keys(k, {"nodes", "max_nodes", "max_step", "resolution", "row_stride"}, "kernel");
            if (k.contains("nodes")) c.kernel.options.nodes = k["nodes"].get<int>();
            if (k.contains("max_nodes")) c.kernel.options.max_nodes = k["max_nodes"].get<int>();
            if (k.contains("max_step")) c.kernel.options.max_step = k["max_step"].get<double>();
            if (k.contains("resolution")) c.kernel.options.resolution = k["resolution"].get<double>();
            if (k.contains("row_stride")) c.kernel.row_stride = k["row_stride"].get<int>();
        }
        if (j.contains("logsob")) {
            const Json& l = j["logsob"];
            allow_keys(l, {"p", "q", "inflation", "sensitivity", "beta_variant", "beta_nodes"}, "logsob");
            if (l.contains("p")) c.logsob.p = l["p"].get<double>();
            if (l.contains("q")) c.logsob.q = l["q"].get<double>();
            if (l.contains("inflation")) c.logsob.inflation = l["inflation"].get<double>();
            if (l.contains("sensitivity")) c.logsob.sensitivity = detail::number_list(l["sensitivity"], "logsob.sensitivity");
            if (l.contains("beta_variant")) {
                const auto v = l["beta_variant"].get<std::string>();
                if (v == "proof") {
                    c.logsob.variant = BetaVariant::Proof;
                } else if (v == "statement") {
                    c.logsob.variant = BetaVariant::Statement;
                } else {
                    throw ConfigError("beta_variant must be proof or statement");
                }
            }
            if (l.contains("beta_nodes")) c.logsob.beta_nodes = l["beta_nodes"].get<int>();
        }
        if (j.contains("workers")) c.workers = j["workers"].get<unsigned>();
        if (j.contains("output")) {
            const Json& o = j["output"];
            allow_keys(o, {"dir", "stem", "format"}, "output");
            if (o.contains("dir")) c.output.dir = o["dir"].get<std::string>();
            if (o.contains("stem")) c.output.stem = o["stem"].get<std::string>();
            if (o.contains("format")) c.output.format = o["format"].get<std::string>();
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    validate(c);
    return c;
}

inline void validate(const ExperimentConfig& c) {
    if (c.estimator.n_paths == 0) throw ConfigError("estimator.n_paths must be positive");
    if (!(c.estimator.dt > 0.0) || c.estimator.dt > c.estimator.max_dt)
        throw ConfigError("estimator.dt must lie in (0, max_dt]");
    if (c.oracle.nodes < 32 || c.oracle.nodes % 2 != 0) throw ConfigError("oracle.nodes must be even and >= 32");
    if (!(c.oracle.max_step > 0.0)) throw ConfigError("oracle.max_step must be positive");
    if (c.kernel.options.nodes < 16 || c.kernel.options.max_nodes < c.kernel.options.nodes)
        throw ConfigError("kernel nodes must satisfy 16 <= nodes <= max_nodes");
    if (c.kernel.row_stride < 1) throw ConfigError("kernel.row_stride must be at least 1");
    if (!(c.logsob.p > 1.0) || !(c.logsob.q > c.logsob.p)) throw ConfigError("logsob needs 1 < p < q");
    if (!(c.logsob.inflation >= 1.0)) throw ConfigError("logsob.inflation must be at least 1");
    for (double f : c.logsob.sensitivity)
        if (!(f > 0.0)) throw ConfigError("logsob.sensitivity factors must be positive");
    if (c.logsob.beta_nodes < 2) throw ConfigError("logsob.beta_nodes must be at least 2");
    if (c.workers < 1) throw ConfigError("workers must be at least 1");
    if (c.output.format != "csv" && c.output.format != "json") throw ConfigError("output.format must be csv or json");
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
    return parse_config(j);
}

}  // namespace evoheat
