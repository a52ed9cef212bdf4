#include "evoheat/checks.hpp"
#include "evoheat/config.hpp"
#include "evoheat/report.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

using namespace evoheat;

namespace {

constexpr double kPi = std::numbers::pi;

Json base(const std::string& kind = "static_circle") {
    return Json{{"name", "unit"},
                {"model", {{"kind", kind}}},
                {"grid", {{"t", {0.2}}, {"points", {0.0, 2.0}}, {"functions", {"cos:1:0.5:1"}}}},
                {"checks", Json::array()},
                {"estimator", {{"n_paths", 2000}, {"dt", 2e-3}, {"seed", 7}}},
                {"oracle", {{"nodes", 128}, {"max_step", 2e-3}}}};
}

ExperimentConfig config(const Json& j) { return parse_config(j); }

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("evoheat_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const char* cli = std::getenv("EVOHEAT_CLI");
    if (cli == nullptr) return -1;
    const int status = std::system((std::string(cli) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, RejectsUnknownKeys) {
    Json j = base();
    j["colour"] = 1;
    EXPECT_THROW(config(j), ConfigError);
    j = base();
    j["grid"]["tt"] = {0.1};
    EXPECT_THROW(config(j), ConfigError);
    j = base();
    j["overrides"] = {{"harnack_i", {{"pp", {2.0}}}}};
    EXPECT_THROW(config(j), ConfigError);
    j = base();
    j["overrides"] = {{"no_such_check", {{"p", {2.0}}}}};
    EXPECT_THROW(config(j), ConfigError);
}

TEST(Config, ValidatesValues) {
    Json j = base();
    j["grid"]["t"] = {1.5};
    EXPECT_THROW(config(j), ConfigError);
    j = base();
    j["grid"]["functions"] = {"wiggle:1"};
    EXPECT_THROW(config(j), ConfigError);
    j = base();
    j["output"] = {{"format", "xml"}};
    EXPECT_THROW(config(j), ConfigError);
    j = base();
    j["checks"] = {"harnack_iii"};
    EXPECT_THROW(config(j), ConfigError);
}

TEST(Config, OverridesStartFromTheBaseGrid) {
    Json j = base();
    j["overrides"] = {{"harnack_i", {{"p", {1.5, 3.0}}}}};
    const auto c = config(j);
    EXPECT_EQ(c.grid_for(CheckId::HarnackI).p, (std::vector<double>{1.5, 3.0}));
    EXPECT_EQ(c.grid_for(CheckId::HarnackI).t, c.grid.t);
    EXPECT_EQ(c.grid_for(CheckId::HarnackII).p, c.grid.p);
}

TEST(Report, VerdictThresholds) {
    CheckReport r;
    r.lhs = 1.0;
    r.rhs = 1.5;
    finalize(r);
    EXPECT_EQ(r.verdict, Verdict::Holds);
    r.rhs = 0.99;
    r.budget.statistical = 0.02;
    finalize(r);
    EXPECT_EQ(r.verdict, Verdict::HoldsWithinError);
    r.budget.statistical = 0.005;
    finalize(r);
    EXPECT_EQ(r.verdict, Verdict::Violated);
    r.rhs = std::nan("");
    finalize(r);
    EXPECT_EQ(r.verdict, Verdict::Violated);
    r.rhs = 1.0 + 1e-3;
    r.budget = {};
    finalize(r, true);
    EXPECT_NEAR(r.margin, -1e-3, 1e-15);
}

TEST(Sweep, EmptyCheckListGivesEmptyReport) {
    const auto table = sweep(config(base()));
    EXPECT_TRUE(table.rows.empty());
    EXPECT_TRUE(table.skipped.empty());
    EXPECT_FALSE(table.any_violated());
    EXPECT_EQ(emit_csv(table), std::string(kCsvHeader) + "\n");
}

TEST(Sweep, SphereDualityOfConstantIsMeasureMass) {
    Json j = base("shrinking_sphere");
    j["grid"]["t"] = {0.1, 0.3};
    j["grid"]["functions"] = {"const:1"};
    const auto out = run_check(config(j), CheckId::Duality);
    ASSERT_EQ(out.rows.size(), 2u);
    for (const auto& r : out.rows) {
        const double mass = 4.0 * kPi * (1.0 - 2.0 * *r.t);
        EXPECT_NEAR(r.lhs, mass, 1e-10);
        EXPECT_NEAR(r.rhs, mass, 1e-10);
        EXPECT_NEAR(r.margin, 0.0, 1e-10);
        EXPECT_NE(r.verdict, Verdict::Violated);
    }
}

TEST(Sweep, PlainHarnackOnStaticCircleHolds) {
    Json j = base();
    j["grid"]["t"] = {0.1, 0.4};
    j["grid"]["p"] = {2.0};
    j["grid"]["points"] = {0.0, 1.0, 2.5, 4.0};
    const auto out = run_check(config(j), CheckId::HarnackPlain);
    ASSERT_EQ(out.rows.size(), 2u * 16u);
    for (const auto& r : out.rows) EXPECT_EQ(r.verdict, Verdict::Holds) << *r.x << " " << *r.y << " " << *r.t;
}

TEST(Sweep, DegenerateHarnackRowsHaveZeroExponent) {
    Json j = base();
    j["grid"]["p"] = {1.5, 4.0};
    const auto out = run_check(config(j), CheckId::HarnackI);
    for (const auto& r : out.rows) {
        if (*r.x != *r.y) continue;
        EXPECT_EQ(r.extras.at("exponent"), 0.0);
        EXPECT_GE(r.margin, 0.0);
    }
}

TEST(Sweep, PGridMultipliesRows) {
    Json j = base();
    j["grid"]["p"] = {2.0};
    const auto one = run_check(config(j), CheckId::HarnackI);
    j["grid"]["p"] = {1.5, 2.0, 4.0};
    const auto three = run_check(config(j), CheckId::HarnackI);
    EXPECT_EQ(three.rows.size(), 3u * one.rows.size());
}

TEST(Sweep, HarnackMarginIsContinuousInP) {
    // Halving the p spacing should roughly halve the largest jump between
    // adjacent margins; a discontinuity would not shrink.
    auto max_jump = [](double h) {
        Json j = base();
        j["grid"]["points"] = {0.0, 1.5};
        std::vector<double> ps;
        for (double p = 1.5; p <= 3.0 + 1e-12; p += h) ps.push_back(p);
        j["grid"]["p"] = ps;
        const auto rows = run_check(config(j), CheckId::HarnackI).rows;
        std::map<std::pair<double, double>, std::vector<double>> by_xy;
        for (const auto& r : rows) by_xy[{*r.x, *r.y}].push_back(r.margin);
        double jump = 0.0;
        for (const auto& [xy, m] : by_xy)
            for (std::size_t k = 1; k < m.size(); ++k) jump = std::max(jump, std::abs(m[k] - m[k - 1]));
        return jump;
    };
    const double coarse = max_jump(0.1), fine = max_jump(0.05);
    EXPECT_GT(coarse, 0.0);
    EXPECT_LT(fine, 0.75 * coarse);
}

TEST(Sweep, SinglePointSweepEqualsRunCheck) {
    Json j = base();
    j["grid"]["points"] = {1.0};
    j["checks"] = {"gradient"};
    const auto c = config(j);
    const auto table = sweep(c);
    const auto direct = run_check(c, CheckId::Gradient);
    ASSERT_EQ(table.rows.size(), 1u);
    EXPECT_EQ(table.rows, direct.rows);
}

TEST(Sweep, HypothesisFailuresAreSkippedWithReason) {
    Json j = base("conformal_circle");
    j["model"]["log_scale"] = {{{"mode", 1}, {"cos", {0.0, 0.1}}}};
    j["model"]["potential"] = {{{"mode", 1}, {"cos", {0.5}}}};
    j["grid"]["t"] = {0.05};
    j["checks"] = {"kernel_bound_cor1", "kernel_bound_cor2"};
    const auto table = sweep(config(j));
    EXPECT_TRUE(table.rows.empty());
    ASSERT_EQ(table.skipped.size(), 2u);
    EXPECT_EQ(table.skipped[0].check_id, "kernel_bound_cor1");
    EXPECT_FALSE(table.skipped[0].reason.empty());
}

TEST(Sweep, NonZonalSphereDataFallsBackToMonteCarlo) {
    Json j = base("shrinking_sphere");
    j["grid"]["functions"] = {"sin:2:1:3"};
    j["grid"]["points"] = {1.0};
    const auto fallback = run_check(config(j), CheckId::HarnackPlain);
    ASSERT_EQ(fallback.rows.size(), 1u);
    EXPECT_EQ(fallback.rows[0].method, "mc");
    EXPECT_GT(fallback.rows[0].budget.statistical, 0.0);

    j["lhs"] = "oracle_only";
    const auto none = run_check(config(j), CheckId::HarnackPlain);
    EXPECT_TRUE(none.rows.empty());
    EXPECT_EQ(none.skipped.size(), 1u);
}

TEST(Sweep, BothModeGivesOneRowPerMethod) {
    Json j = base();
    j["lhs"] = "both";
    j["grid"]["points"] = {1.0};
    const auto out = run_check(config(j), CheckId::LogSobSemigroup);
    ASSERT_EQ(out.rows.size(), 2u);
    EXPECT_EQ(out.rows[0].method, "oracle");
    EXPECT_EQ(out.rows[1].method, "mc");
    EXPECT_NEAR(out.rows[0].lhs, out.rows[1].lhs, out.rows[1].budget.statistical + 1e-6);
}

TEST(Emit, CsvHasFixedHeaderAndRoundTrippingNumbers) {
    Json j = base();
    j["checks"] = {"duality", "gradient"};
    const auto table = sweep(config(j));
    const std::string csv = emit_csv(table);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
    EXPECT_EQ(csv.find('\r'), std::string::npos);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    std::size_t k = 0;
    while (std::getline(lines, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        ASSERT_GE(cells.size(), 15u);
        EXPECT_EQ(std::stod(cells[11]), table.rows[k].lhs);
        EXPECT_EQ(std::stod(cells[12]), table.rows[k].rhs);
        ++k;
    }
    EXPECT_EQ(k, table.rows.size());
}

TEST(Emit, JsonRoundTripEqualsInMemory) {
    Json j = base();
    j["checks"] = {"harnack_ii", "logsob_measure", "duality"};
    j["grid"]["r"] = {0.1, 1.0};
    j["kernel"] = {{"nodes", 64}, {"max_nodes", 128}};
    auto table = sweep(config(j));
    ASSERT_FALSE(table.rows.empty());
    table.rows[0].extras["unbounded"] = std::numeric_limits<double>::infinity();
    table.skipped.push_back({"martingale", "reason"});
    EXPECT_EQ(parse_json_report(emit_json(table)), table);
}

TEST(Emit, RerunsAndWorkerCountsAreByteIdentical) {
    Json j = base();
    j["checks"] = {"harnack_i", "martingale", "duality"};
    j["lhs"] = "both";
    j["grid"]["checkpoints"] = {0.5, 1.0};
    auto run = [&](unsigned workers, const std::string& tag) {
        Json k = j;
        k["workers"] = workers;
        const auto dir = scratch(tag);
        const auto table = sweep(config(k));
        return slurp(write_report(table, dir.string(), "r", "json")) +
               slurp(write_report(table, dir.string(), "r", "csv"));
    };
    const std::string a = run(1, "a"), b = run(1, "b"), c = run(3, "c");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(Emit, SeedChangesMonteCarloRows) {
    Json j = base();
    j["checks"] = {"martingale"};
    const auto a = sweep(config(j));
    j["estimator"]["seed"] = 8;
    const auto b = sweep(config(j));
    ASSERT_EQ(a.rows.size(), b.rows.size());
    EXPECT_NE(a.rows[0].lhs, b.rows[0].lhs);
}

TEST(DefaultConfigs, CoverEveryCheck) {
    const char* dir = std::getenv("EVOHEAT_CONFIGS");
    if (dir == nullptr) GTEST_SKIP() << "EVOHEAT_CONFIGS not set";
    std::set<std::string> seen;
    int n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        const auto c = load_config(entry.path().string());
        for (CheckId id : c.checks) seen.insert(to_string(id));
        ++n;
    }
    EXPECT_EQ(n, 4);
    EXPECT_EQ(seen.size(), kCheckNames.size());
}

TEST(Cli, ExitCodes) {
    if (std::getenv("EVOHEAT_CLI") == nullptr) GTEST_SKIP() << "EVOHEAT_CLI not set";
    const auto dir = scratch("cli");
    const auto write = [&](const std::string& name, const Json& j) {
        const auto p = dir / name;
        std::ofstream(p) << j.dump();
        return p.string();
    };
    const std::string empty = write("empty.json", base());
    EXPECT_EQ(run_cli("sweep --config " + empty + " --out " + dir.string()), 0);
    EXPECT_EQ(slurp(dir / "report.csv"), std::string(kCsvHeader) + "\n");

    Json bad = base();
    bad["surprise"] = true;
    EXPECT_EQ(run_cli("sweep --config " + write("bad.json", bad)), 1);
    EXPECT_EQ(run_cli("sweep --config " + (dir / "missing.json").string()), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("sweep --config " + empty + " --mc-only --oracle-only"), 1);

    Json one = base();
    one["grid"]["points"] = {1.0};
    const std::string onecfg = write("one.json", one);
    EXPECT_EQ(run_cli("gradient --config " + onecfg + " --format json --out " + dir.string()), 0);
    const auto report = dir / "report_gradient.json";
    ASSERT_TRUE(std::filesystem::exists(report));
    EXPECT_EQ(run_cli("report " + report.string()), 0);

    auto table = parse_json_report(slurp(report));
    ASSERT_FALSE(table.rows.empty());
    table.rows[0].rhs = table.rows[0].lhs - 1.0;
    finalize(table.rows[0]);
    const auto violated = dir / "violated.json";
    std::ofstream(violated, std::ios::binary) << emit_json(table);
    EXPECT_EQ(run_cli("report " + violated.string()), 2);

    EXPECT_EQ(run_cli("simulate --config " + onecfg + " --paths 500 --out " + dir.string()), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "report_simulate.csv"));
}
