// Command-line front end: runs inequality checks from a JSON config and writes
// CSV or JSON reports. Exit codes: 0 no violations, 2 some check VIOLATED,
// 1 usage or configuration error.

#include "evoheat/evoheat.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace evoheat;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<double> dt;
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::optional<unsigned> workers;
    bool mc_only = false;
    bool oracle_only = false;
    std::string report_path;
};

ExperimentConfig load(const Options& o) {
    ExperimentConfig cfg = load_config(o.config);
    if (o.seed) cfg.estimator.seed = *o.seed;
    if (o.paths) cfg.estimator.n_paths = *o.paths;
    if (o.dt) cfg.estimator.dt = *o.dt;
    if (o.out) cfg.output.dir = *o.out;
    if (o.format) cfg.output.format = *o.format;
    if (o.workers) cfg.workers = *o.workers;
    if (o.mc_only) cfg.lhs = LhsMode::MonteCarlo;
    if (o.oracle_only) cfg.lhs = LhsMode::OracleOnly;
    validate(cfg);
    return cfg;
}

void print_summary(const ReportTable& table, std::ostream& os) {
    os << "config " << table.config << " model " << table.model << " seed " << table.seed << "\n";
    for (const auto& s : table.summary()) {
        char line[256];
        std::snprintf(line, sizeof line, "%-20s rows %5zu  holds %5zu  within_error %4zu  violated %4zu  min_margin %.6g\n",
                      s.check_id.c_str(), s.rows, s.holds, s.within_error, s.violated, s.min_margin);
        os << line;
    }
    for (const auto& s : table.skipped) os << "skipped " << s.check_id << ": " << s.reason << "\n";
}

int run_checks(const Options& o, const std::vector<CheckId>& ids, const std::string& suffix) {
    const ExperimentConfig cfg = load(o);
    const ReportTable table = sweep(cfg, ids);
    const auto path = write_report(table, cfg.output.dir, cfg.output.stem + suffix, cfg.output.format);
    print_summary(table, std::cout);
    std::cout << "wrote " << path.string() << "\n";
    return table.any_violated() ? 2 : 0;
}

/// Monte Carlo against reference-solver values of P^rho_{s,t} f at the grid
/// points, as a plot-ready table.
int simulate(const Options& o) {
    const ExperimentConfig cfg = load(o);
    const CheckRunner runner(cfg);
    std::string csv = "model,f,s,t,x,mc_mean,mc_stderr,oracle,oracle_error\n";
    auto value = [](double v, double) { return v; };
    for (double s : cfg.grid.s) {
        for (double t : cfg.grid.t) {
            if (!(t > s)) continue;
            for (const auto& fid : cfg.grid.functions) {
                const TestFunction f = TestFunction::parse(fid);
                std::optional<GridFunction> ref;
                if (runner.oracle_ok(f) && cfg.lhs != LhsMode::MonteCarlo) ref = runner.oracle(s, t, 1.0, f, value);
                for (double a : cfg.grid.points) {
                    const int node = runner.node_index(a);
                    const Point x = runner.grid().point(node);
                    std::string mc_mean, mc_se;
                    if (cfg.lhs != LhsMode::OracleOnly) {
                        const auto est = runner.monte_carlo(
                            s, t, 1.0, f, {value}, x,
                            detail::task_seed(cfg.estimator.seed, "simulate" + detail::key_of({s, t, a}, fid)));
                        mc_mean = detail::g17(est[0].value);
                        mc_se = detail::g17(est[0].std_error);
                    }
                    std::string oracle_value, oracle_err;
                    if (ref) {
                        oracle_value = detail::g17(ref->values[static_cast<std::size_t>(node)]);
                        oracle_err = detail::g17(ref->error[static_cast<std::size_t>(node)]);
                    }
                    csv += cfg.model_id() + "," + fid + "," + detail::g17(s) + "," + detail::g17(t) + "," +
                           detail::g17(runner.grid().nodes()[static_cast<std::size_t>(node)]) + "," + mc_mean + "," +
                           mc_se + "," + oracle_value + "," + oracle_err + "\n";
                }
            }
        }
    }
    std::filesystem::create_directories(cfg.output.dir);
    const auto path = std::filesystem::path(cfg.output.dir) / (cfg.output.stem + "_simulate.csv");
    std::ofstream(path, std::ios::binary) << csv;
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int report(const Options& o) {
    std::ifstream in(o.report_path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + o.report_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const ReportTable table = parse_json_report(ss.str());
    print_summary(table, std::cout);
    return table.any_violated() ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical checks of heat-equation inequalities on evolving model manifolds"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--paths", o.paths, "Monte Carlo paths per estimate");
        sub->add_option("--dt", o.dt, "path step size");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--workers", o.workers, "worker threads");
        auto* mc = sub->add_flag("--mc-only", o.mc_only, "left-hand sides by Monte Carlo only");
        auto* orc = sub->add_flag("--oracle-only", o.oracle_only, "left-hand sides by the reference solver only");
        mc->excludes(orc);
    };

    struct Command {
        const char* name;
        const char* help;
        std::vector<CheckId> ids;
        std::string suffix;
    };
    const std::vector<Command> commands{
        {"harnack", "Harnack inequalities (i), (ii) and the plain semigroup version",
         {CheckId::HarnackI, CheckId::HarnackII, CheckId::HarnackPlain}, "_harnack"},
        {"gradient", "gradient estimate", {CheckId::Gradient}, "_gradient"},
        {"kernel-bound", "heat-kernel upper bound and its specializations",
         {CheckId::KernelBound, CheckId::KernelBoundCor1, CheckId::KernelBoundCor2}, "_kernel_bound"},
        {"logsob", "log-Sobolev inequalities and supercontractivity",
         {CheckId::LogSobSemigroup, CheckId::LogSobMeasure, CheckId::Supercontractivity}, "_logsob"},
    };

    std::vector<CLI::App*> check_subs;
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        add_common(sub);
        check_subs.push_back(sub);
    }
    auto* sweep_sub = app.add_subcommand("sweep", "every check listed in the config");
    add_common(sweep_sub);
    auto* sim_sub = app.add_subcommand("simulate", "Monte Carlo vs reference values as CSV");
    add_common(sim_sub);
    auto* report_sub = app.add_subcommand("report", "summarize a JSON report");
    report_sub->add_option("path", o.report_path, "report file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        for (std::size_t i = 0; i < commands.size(); ++i)
            if (check_subs[i]->parsed()) return run_checks(o, commands[i].ids, commands[i].suffix);
        if (sweep_sub->parsed()) {
            const ExperimentConfig cfg = load(o);
            return run_checks(o, cfg.checks, "");
        }
        if (sim_sub->parsed()) return simulate(o);
        if (report_sub->parsed()) return report(o);
    } catch (const evoheat::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
