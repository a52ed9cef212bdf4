#pragma once

// Check reports and their CSV / JSON forms. CSV uses a fixed column order and
// %.17g floats; JSON numbers use the shortest representation that parses back
// to the same double. Non-finite values are written as strings in JSON.

#include "evoheat/config.hpp"
#include "evoheat/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evoheat {

enum class Verdict { Holds, HoldsWithinError, Violated };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Holds: return "HOLDS";
        case Verdict::HoldsWithinError: return "HOLDS_WITHIN_ERROR";
        case Verdict::Violated: return "VIOLATED";
    }
    return "VIOLATED";
}

inline Verdict parse_verdict(const std::string& s) {
    if (s == "HOLDS") return Verdict::Holds;
    if (s == "HOLDS_WITHIN_ERROR") return Verdict::HoldsWithinError;
    if (s == "VIOLATED") return Verdict::Violated;
    throw ConfigError("unknown verdict: " + s);
}

/// Components of the error budget. `statistical` already carries the 3x
/// stderr factor.
struct ErrorBudget {
    double statistical = 0.0;
    double discretization = 0.0;
    double quadrature = 0.0;

    [[nodiscard]] double total() const { return statistical + discretization + quadrature; }
    bool operator==(const ErrorBudget&) const = default;
};

struct CheckReport {
    std::string check_id;
    std::string model;
    std::string method;  // oracle | mc | quadrature
    std::optional<double> s, t, p, q, r, x, y;
    std::string f;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    ErrorBudget budget;
    double error_budget = 0.0;
    Verdict verdict = Verdict::Holds;
    std::map<std::string, double> extras;

    bool operator==(const CheckReport&) const = default;
};

/// Fills margin, error_budget and verdict. Inequalities use margin = rhs - lhs;
/// identities use margin = -|rhs - lhs|.
inline void finalize(CheckReport& row, bool identity = false) {
    row.margin = identity ? -std::abs(row.rhs - row.lhs) : row.rhs - row.lhs;
    if (std::isnan(row.margin)) row.margin = -std::numeric_limits<double>::infinity();
    row.error_budget = row.budget.total();
    if (row.margin >= 0.0) {
        row.verdict = Verdict::Holds;
    } else if (row.margin >= -row.error_budget) {
        row.verdict = Verdict::HoldsWithinError;
    } else {
        row.verdict = Verdict::Violated;
    }
}

struct SkippedCheck {
    std::string check_id;
    std::string reason;
    bool operator==(const SkippedCheck&) const = default;
};

struct CheckSummary {
    std::string check_id;
    std::size_t rows = 0;
    std::size_t holds = 0;
    std::size_t within_error = 0;
    std::size_t violated = 0;
    double min_margin = std::numeric_limits<double>::infinity();
};

struct ReportTable {
    std::string config;
    std::string model;
    std::uint64_t seed = 0;
    std::vector<CheckReport> rows;
    std::vector<SkippedCheck> skipped;

    [[nodiscard]] bool any_violated() const {
        for (const auto& r : rows)
            if (r.verdict == Verdict::Violated) return true;
        return false;
    }

    /// One entry per check id present, in check-id order.
    [[nodiscard]] std::vector<CheckSummary> summary() const {
        std::vector<CheckSummary> out;
        for (const auto& [id, name] : kCheckNames) {
            CheckSummary s;
            s.check_id = std::string(name);
            for (const auto& r : rows) {
                if (r.check_id != s.check_id) continue;
                ++s.rows;
                s.min_margin = std::min(s.min_margin, r.margin);
                if (r.verdict == Verdict::Holds) ++s.holds;
                if (r.verdict == Verdict::HoldsWithinError) ++s.within_error;
                if (r.verdict == Verdict::Violated) ++s.violated;
            }
            if (s.rows > 0) out.push_back(s);
        }
        return out;
    }

    bool operator==(const ReportTable& o) const {
        return config == o.config && model == o.model && seed == o.seed && rows == o.rows && skipped == o.skipped;
    }
};

inline constexpr const char* kCsvHeader =
    "check_id,model,method,s,t,p,q,r,x,y,f,lhs,rhs,margin,error_budget,verdict";

namespace detail {

inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string g17(const std::optional<double>& v) { return v ? g17(*v) : std::string(); }

inline Json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline double read_number(const Json& j) {
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ConfigError("not a number: " + s);
}

}  // namespace detail

inline std::string emit_csv(const ReportTable& table) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : table.rows) {
        out += r.check_id + "," + r.model + "," + r.method + "," + detail::g17(r.s) + "," + detail::g17(r.t) + "," +
               detail::g17(r.p) + "," + detail::g17(r.q) + "," + detail::g17(r.r) + "," + detail::g17(r.x) + "," +
               detail::g17(r.y) + "," + r.f + "," + detail::g17(r.lhs) + "," + detail::g17(r.rhs) + "," +
               detail::g17(r.margin) + "," + detail::g17(r.error_budget) + "," + to_string(r.verdict) + "\n";
    }
    return out;
}

inline Json to_json(const CheckReport& r) {
    Json j;
    j["check_id"] = r.check_id;
    j["model"] = r.model;
    j["method"] = r.method;
    Json params = Json::object();
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) params[key] = detail::number(*v);
    };
    put("s", r.s);
    put("t", r.t);
    put("p", r.p);
    put("q", r.q);
    put("r", r.r);
    put("x", r.x);
    put("y", r.y);
    if (!r.f.empty()) params["f"] = r.f;
    j["parameters"] = params;
    j["lhs"] = detail::number(r.lhs);
    j["rhs"] = detail::number(r.rhs);
    j["margin"] = detail::number(r.margin);
    j["error_budget"] = detail::number(r.error_budget);
    j["budget"] = {{"statistical", detail::number(r.budget.statistical)},
                   {"discretization", detail::number(r.budget.discretization)},
                   {"quadrature", detail::number(r.budget.quadrature)}};
    j["verdict"] = to_string(r.verdict);
    Json extras = Json::object();
    for (const auto& [k, v] : r.extras) extras[k] = detail::number(v);
    j["extras"] = extras;
    return j;
}

inline CheckReport report_from_json(const Json& j) {
    CheckReport r;
    r.check_id = j.at("check_id").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.method = j.at("method").get<std::string>();
    const Json& params = j.at("parameters");
    auto get = [&](const char* key, std::optional<double>& v) {
        if (params.contains(key)) v = detail::read_number(params[key]);
    };
    get("s", r.s);
    get("t", r.t);
    get("p", r.p);
    get("q", r.q);
    get("r", r.r);
    get("x", r.x);
    get("y", r.y);
    if (params.contains("f")) r.f = params["f"].get<std::string>();
    r.lhs = detail::read_number(j.at("lhs"));
    r.rhs = detail::read_number(j.at("rhs"));
    r.margin = detail::read_number(j.at("margin"));
    r.error_budget = detail::read_number(j.at("error_budget"));
    const Json& b = j.at("budget");
    r.budget.statistical = detail::read_number(b.at("statistical"));
    r.budget.discretization = detail::read_number(b.at("discretization"));
    r.budget.quadrature = detail::read_number(b.at("quadrature"));
    r.verdict = parse_verdict(j.at("verdict").get<std::string>());
    for (const auto& [k, v] : j.at("extras").items()) r.extras[k] = detail::read_number(v);
    return r;
}

inline std::string emit_json(const ReportTable& table) {
    Json j;
    j["config"] = table.config;
    j["model"] = table.model;
    j["seed"] = table.seed;
    Json rows = Json::array();
    for (const auto& r : table.rows) rows.push_back(to_json(r));
    j["rows"] = rows;
    Json skipped = Json::array();
    for (const auto& s : table.skipped) skipped.push_back({{"check_id", s.check_id}, {"reason", s.reason}});
    j["skipped"] = skipped;
    Json summary = Json::array();
    for (const auto& s : table.summary())
        summary.push_back({{"check_id", s.check_id},
                           {"rows", s.rows},
                           {"holds", s.holds},
                           {"holds_within_error", s.within_error},
                           {"violated", s.violated},
                           {"min_margin", detail::number(s.min_margin)}});
    j["summary"] = summary;
    return j.dump(2) + "\n";
}

inline ReportTable parse_json_report(const std::string& text) {
    try {
        const Json j = Json::parse(text);
        ReportTable t;
        t.config = j.at("config").get<std::string>();
        t.model = j.at("model").get<std::string>();
        t.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& r : j.at("rows")) t.rows.push_back(report_from_json(r));
        for (const auto& s : j.at("skipped"))
            t.skipped.push_back({s.at("check_id").get<std::string>(), s.at("reason").get<std::string>()});
        return t;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed report: ") + e.what());
    }
}

/// Writes <dir>/<stem>.<format> with LF line endings and returns the path.
inline std::filesystem::path write_report(const ReportTable& table, const std::string& dir, const std::string& stem,
                                          const std::string& format) {
    if (format != "csv" && format != "json") throw ConfigError("format must be csv or json");
    std::filesystem::create_directories(dir);
    const auto path = std::filesystem::path(dir) / (stem + "." + format);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << (format == "csv" ? emit_csv(table) : emit_json(table));
    return path;
}

}  // namespace evoheat
