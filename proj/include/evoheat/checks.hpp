#pragma once

// Inequality checks: each assembles a left-hand side (reference solver on grid
// nodes, or Monte Carlo at the same points) and a right-hand side from the
// constants module, and files one report row per parameter tuple.
//
// Error budgets: Monte Carlo terms enter as 3 x stderr (4 x when the check
// falls back to Monte Carlo because the reference solver cannot represent the
// data), solver terms as their Richardson estimates, quadrature terms as
// refinement deltas. Each term is weighted by the local derivative of the
// side it enters.

#include "evoheat/config.hpp"
#include "evoheat/constants.hpp"
#include "evoheat/estimators.hpp"
#include "evoheat/oracle.hpp"
#include "evoheat/profile.hpp"
#include "evoheat/quadrature.hpp"
#include "evoheat/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace evoheat {

/// A semigroup value with its statistical and discretization uncertainty.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    double discretization = 0.0;
};

/// Integrand g(f(y), |grad^t f|_t(y)) of a semigroup evaluation.
using Integrand = std::function<double(double, double)>;

struct CheckOutput {
    std::vector<CheckReport> rows;
    std::vector<SkippedCheck> skipped;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for one task, fixed by the master seed and a description of the task.
inline std::uint64_t task_seed(std::uint64_t seed, const std::string& key) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ h);
}

/// fn(0..n-1) on up to `workers` threads; results stay in index order.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned workers, const std::function<T(std::size_t)>& fn) {
    std::vector<T> out(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&]() {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

inline std::string key_of(std::initializer_list<double> values, const std::string& tail = {}) {
    std::string k;
    for (double v : values) k += g17(v) + "|";
    return k + tail;
}

/// The check does not apply under the current settings.
struct NotApplicable : Error {
    using Error::Error;
};

inline double xlogx(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }

/// Adds |w| times the uncertainty of `e` to the budget.
inline void add_term(ErrorBudget& b, double w, const Estimate& e, double mc_factor) {
    b.statistical += mc_factor * std::abs(w) * e.std_error;
    b.discretization += std::abs(w) * e.discretization;
}

/// Standard normal draw mapped to (0, 1).
inline double to_uniform(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace detail

class CheckRunner {
public:
    CheckRunner(const CheckRunner&) = delete;
    CheckRunner& operator=(const CheckRunner&) = delete;

    explicit CheckRunner(ExperimentConfig cfg)
        : cfg_(std::move(cfg)), model_(cfg_.model.build()), profile_(bound_profile(model_)), grid_(make_grid()) {}

    [[nodiscard]] const ExperimentConfig& config() const { return cfg_; }
    [[nodiscard]] const EvolvingModel& model() const { return model_; }
    [[nodiscard]] const BoundProfile& profile() const { return profile_; }

    using Task = std::function<CheckOutput()>;

    /// Independent units of work for one check; concatenating their outputs
    /// in order gives the check's report.
    [[nodiscard]] std::vector<Task> tasks(CheckId id) const {
        switch (id) {
            case CheckId::HarnackI:
            case CheckId::HarnackII:
            case CheckId::HarnackPlain: return harnack_tasks(id);
            case CheckId::Gradient: return gradient_tasks();
            case CheckId::KernelBound:
            case CheckId::KernelBoundCor1:
            case CheckId::KernelBoundCor2: return kernel_tasks(id);
            case CheckId::LogSobSemigroup: return logsob_semigroup_tasks();
            case CheckId::LogSobMeasure: return logsob_measure_tasks();
            case CheckId::Supercontractivity: return supercontractivity_tasks();
            case CheckId::Duality: return duality_tasks();
            case CheckId::Martingale: return martingale_tasks();
        }
        return {};
    }

    /// Runs the tasks of several checks concurrently; order follows `ids`.
    [[nodiscard]] CheckOutput run(const std::vector<CheckId>& ids) const {
        std::vector<Task> all;
        for (CheckId id : ids) {
            auto t = tasks(id);
            all.insert(all.end(), t.begin(), t.end());
        }
        inner_workers_ = all.size() >= cfg_.workers ? 1u : cfg_.workers;
        const auto parts = detail::parallel_map<CheckOutput>(all.size(), cfg_.workers,
                                                             [&](std::size_t i) { return all[i](); });
        CheckOutput out;
        for (const auto& p : parts) {
            out.rows.insert(out.rows.end(), p.rows.begin(), p.rows.end());
            out.skipped.insert(out.skipped.end(), p.skipped.begin(), p.skipped.end());
        }
        return out;
    }

    // ---- building blocks, public for tests and tools -----------------------

    /// Grid node nearest to a standard angle.
    [[nodiscard]] int node_index(double angle) const {
        const double h = grid_.spacing();
        if (grid_.periodic()) {
            const long i = std::lround(wrap_angle(angle) / h);
            return static_cast<int>(((i % grid_.size()) + grid_.size()) % grid_.size());
        }
        return std::clamp(static_cast<int>(std::floor(angle / h)), 0, grid_.size() - 1);
    }

    [[nodiscard]] const Grid1D& grid() const { return grid_; }

    /// The reference solver can represent f on this model.
    [[nodiscard]] bool oracle_ok(const TestFunction& f) const {
        return f.oracle_representable(model_) && (!model_.is_sphere() || model_.potential().is_spatially_constant());
    }

    /// |grad^t f|_t per unit angular derivative at standard angle a.
    [[nodiscard]] double gradient_scale(double t, double a) const {
        return model_.is_sphere() ? 1.0 / std::sqrt(1.0 - 2.0 * t) : std::exp(-model_.log_scale_at(t, a).f);
    }

    /// Integrand sampled on the grid at time t.
    [[nodiscard]] std::vector<double> sample(const TestFunction& f, double t, const Integrand& g) const {
        if (!oracle_ok(f)) throw OracleUnavailable("test function " + f.id() + " is not representable on the grid");
        std::vector<double> v(static_cast<std::size_t>(grid_.size()));
        for (int i = 0; i < grid_.size(); ++i) {
            const double a = grid_.nodes()[static_cast<std::size_t>(i)];
            const auto [value, slope] = f.profile(a, model_.is_sphere());
            v[static_cast<std::size_t>(i)] = g(value, std::abs(slope) * gradient_scale(t, a));
        }
        return v;
    }

    /// E[exp(-lambda int_s^t varrho) g(X_t)] on the grid.
    [[nodiscard]] GridFunction oracle(double s, double t, double lambda, const TestFunction& f,
                                      const Integrand& g) const {
        return solve_values(model_, s, t, sample(f, t, g), lambda, cfg_.oracle);
    }

    /// The same expectations by Monte Carlo from a single point.
    [[nodiscard]] std::vector<Estimate> monte_carlo(double s, double t, double lambda, const TestFunction& f,
                                                    const std::vector<Integrand>& gs, const Point& x,
                                                    std::uint64_t seed) const {
        EstimatorSettings st = cfg_.estimator;
        st.seed = seed;
        st.workers = inner_workers_;
        const auto res = detail::estimate(model_, s, t, x, gs.size(), false, st, [&](const PathState& ps, double* out) {
            const double w = std::exp(-lambda * ps.fk_exponent);
            const FunctionJet jet = f.jet(model_, ps.x);
            const Mat g = model_.metric_at(ps.t, ps.x);
            const double grad = std::sqrt(std::max(0.0, jet.differential.dot(g.ldlt().solve(jet.differential))));
            for (std::size_t k = 0; k < gs.size(); ++k) out[k] = w * gs[k](jet.value, grad);
        });
        std::vector<Estimate> out;
        for (const auto& r : res) out.push_back({r.mean, r.std_error, 0.0});
        return out;
    }

    /// mu_t(g(f, |grad^t f|_t)) by adaptive quadrature.
    [[nodiscard]] double measure_integral(double t, const TestFunction& f, const Integrand& g, double tol) const {
        if (!model_.is_sphere()) {
            auto integrand = [&](double th) {
                const auto [value, slope] = f.profile(th, false);
                return g(value, std::abs(slope) * gradient_scale(t, th)) * model_.mu_density(t, Point::circle(th));
            };
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += quad::integrate(integrand, kTwoPi * k / 8.0, kTwoPi * (k + 1) / 8.0, tol);
            return acc;
        }
        const double a = 1.0 - 2.0 * t;
        const double scale = a * std::exp(-model_.potential().value(t, 0.0));
        if (f.is_zonal()) {
            auto integrand = [&](double th) {
                const auto [value, slope] = f.profile(th, true);
                return g(value, std::abs(slope) / std::sqrt(a)) * std::sin(th);
            };
            return kTwoPi * scale *
                   (quad::integrate(integrand, 0.0, 0.5 * std::numbers::pi, tol) +
                    quad::integrate(integrand, 0.5 * std::numbers::pi, std::numbers::pi, tol));
        }
        auto inner = [&](double th) {
            return quad::integrate(
                [&](double az) {
                    const Eigen::Vector3d p(std::sin(th) * std::cos(az), std::sin(th) * std::sin(az), std::cos(th));
                    Eigen::Vector3d grad;
                    const double value = f.ambient(p, grad);
                    const double tangential = (grad - grad.dot(p) * p).norm() / std::sqrt(a);
                    return g(value, tangential);
                },
                0.0, kTwoPi, tol) *
                   std::sin(th);
        };
        return scale * quad::integrate(inner, 0.0, std::numbers::pi, tol);
    }

private:
    enum class Method { Oracle, MonteCarlo };

    struct Plan {
        Method method;
        double mc_factor;
    };

    Grid1D make_grid() const {
        if (model_.is_sphere() && !model_.potential().is_spatially_constant())
            throw ConfigError("sphere models need a spatially constant potential");
        return Grid1D(model_, cfg_.oracle.nodes);
    }

    [[nodiscard]] static std::string method_name(Method m) { return m == Method::Oracle ? "oracle" : "mc"; }

    /// Methods used for the left-hand side of a pointwise check.
    [[nodiscard]] std::vector<Plan> plans(const TestFunction& f) const {
        const bool ok = oracle_ok(f);
        switch (cfg_.lhs) {
            case LhsMode::Oracle:
                return ok ? std::vector<Plan>{{Method::Oracle, 3.0}} : std::vector<Plan>{{Method::MonteCarlo, 4.0}};
            case LhsMode::OracleOnly:
                if (!ok) throw detail::NotApplicable("Monte Carlo is disabled and the reference solver cannot represent " + f.id());
                return {{Method::Oracle, 3.0}};
            case LhsMode::MonteCarlo: return {{Method::MonteCarlo, 3.0}};
            case LhsMode::Both:
                return ok ? std::vector<Plan>{{Method::Oracle, 3.0}, {Method::MonteCarlo, 3.0}}
                          : std::vector<Plan>{{Method::MonteCarlo, 4.0}};
        }
        return {};
    }

    [[nodiscard]] CheckReport row(CheckId id, const std::string& method) const {
        CheckReport r;
        r.check_id = to_string(id);
        r.model = cfg_.model_id();
        r.method = method;
        return r;
    }

    /// Throws HypothesisViolation unless K, kappa and the requested varrho
    /// envelopes are finite on [s, t].
    void require_bounded(double s, double t, bool rho_below, bool rho_above) const {
        for (int i = 0; i <= 64; ++i) {
            const double u = s + (t - s) * i / 64.0;
            if (!std::isfinite(profile_.K(u)) || !std::isfinite(profile_.kappa(u)))
                throw HypothesisViolation("curvature bound or |d varrho| is not finite on [s, t]");
            if (rho_below && !std::isfinite(profile_.inf_rho(u)))
                throw HypothesisViolation("varrho is not bounded below on [s, t]");
            if (rho_above && !std::isfinite(profile_.sup_rho(u)))
                throw HypothesisViolation("varrho is not bounded above on [s, t]");
        }
    }

    void require_nonnegative(const TestFunction& f) const {
        if (!model_.is_sphere() || f.is_zonal()) {
            for (int i = 0; i < 2048; ++i) {
                const double a = (model_.is_sphere() ? std::numbers::pi : kTwoPi) * i / 2047.0;
                if (f.profile(a, model_.is_sphere()).first < 0.0)
                    throw HypothesisViolation("test function " + f.id() + " must be nonnegative");
            }
            return;
        }
        for (int i = 0; i <= 128; ++i) {
            for (int j = 0; j < 256; ++j) {
                const double th = std::numbers::pi * i / 128.0, az = kTwoPi * j / 256.0;
                Eigen::Vector3d grad;
                const Eigen::Vector3d p(std::sin(th) * std::cos(az), std::sin(th) * std::sin(az), std::cos(th));
                if (f.ambient(p, grad) < 0.0)
                    throw HypothesisViolation("test function " + f.id() + " must be nonnegative");
            }
        }
    }

    /// Values at the configured points: oracle at grid nodes or Monte Carlo.
    [[nodiscard]] std::vector<std::vector<Estimate>> evaluate(Method m, double s, double t, double lambda,
                                                              const TestFunction& f,
                                                              const std::vector<Integrand>& gs,
                                                              const std::vector<int>& nodes,
                                                              const std::string& key) const {
        std::vector<std::vector<Estimate>> out(gs.size(), std::vector<Estimate>(nodes.size()));
        if (m == Method::Oracle) {
            for (std::size_t k = 0; k < gs.size(); ++k) {
                const GridFunction u = oracle(s, t, lambda, f, gs[k]);
                for (std::size_t j = 0; j < nodes.size(); ++j) {
                    const auto i = static_cast<std::size_t>(nodes[j]);
                    out[k][j] = {u.values[i], 0.0, u.error[i]};
                }
            }
            return out;
        }
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            const auto est = monte_carlo(s, t, lambda, f, gs, grid_.point(nodes[j]),
                                         detail::task_seed(cfg_.estimator.seed, key + "|" + std::to_string(nodes[j])));
            for (std::size_t k = 0; k < gs.size(); ++k) out[k][j] = est[k];
        }
        return out;
    }

    [[nodiscard]] std::vector<int> nodes_of(const ParameterGrid& g) const {
        std::vector<int> out;
        for (double a : g.points) out.push_back(node_index(a));
        return out;
    }

    [[nodiscard]] double angle(int node) const { return grid_.nodes()[static_cast<std::size_t>(node)]; }

    /// Runs `body`, turning hypothesis failures into skip entries.
    template <class Body>
    CheckOutput guarded(CheckId id, const std::string& what, Body&& body) const {
        CheckOutput out;
        try {
            body(out);
        } catch (const HypothesisViolation& e) {
            out.rows.clear();
            out.skipped.push_back({to_string(id), what + ": " + e.what()});
        } catch (const OracleUnavailable& e) {
            out.rows.clear();
            out.skipped.push_back({to_string(id), what + ": " + e.what()});
        } catch (const detail::NotApplicable& e) {
            out.rows.clear();
            out.skipped.push_back({to_string(id), what + ": " + e.what()});
        }
        return out;
    }

    // ---- Harnack inequalities ----------------------------------------------

    std::vector<Task> harnack_tasks(CheckId id) const {
        const ParameterGrid& g = cfg_.grid_for(id);
        std::vector<Task> out;
        for (double s : g.s)
            for (double t : g.t)
                for (double p : g.p)
                    for (const auto& fid : g.functions) {
                        if (!(t > s)) continue;
                        out.push_back([=, this]() { return harnack_task(id, g, s, t, p, fid); });
                    }
        return out;
    }

    CheckOutput harnack_task(CheckId id, const ParameterGrid& g, double s, double t, double p,
                             const std::string& fid) const {
        const std::string what = to_string(id) + " s=" + detail::g17(s) + " t=" + detail::g17(t) +
                                 " p=" + detail::g17(p) + " f=" + fid;
        return guarded(id, what, [&](CheckOutput& out) {
            const TestFunction f = TestFunction::parse(fid);
            require_nonnegative(f);
            require_bounded(s, t, true, false);
            const auto c = harnack_constants(profile_, s, t, p);
            const double lambda = id == CheckId::HarnackPlain ? 0.0 : 1.0;
            const std::vector<int> nodes = nodes_of(g);
            std::vector<Integrand> gs{[](double v, double) { return v; },
                                      [p](double v, double) { return std::pow(v, p); }};
            for (const Plan& plan : plans(f)) {
                const std::string key = to_string(id) + detail::key_of({s, t, p}, fid);
                const auto vals = evaluate(plan.method, s, t, lambda, f, gs, nodes, key);
                std::vector<Estimate> moment(nodes.size(), Estimate{1.0, 0.0, 0.0});
                if (id == CheckId::HarnackII) {
                    moment = evaluate(plan.method, s, t, p - 1.0, f, {[](double, double) { return 1.0; }}, nodes,
                                      key + "|moment")[0];
                }
                for (std::size_t ix = 0; ix < nodes.size(); ++ix) {
                    for (std::size_t iy = 0; iy < nodes.size(); ++iy) {
                        const Point x = grid_.point(nodes[ix]), y = grid_.point(nodes[iy]);
                        const double dist = model_.distance(s, x, y);
                        double exponent = 0.0;
                        if (id == CheckId::HarnackI) exponent = harnack_exponent_i(c, dist);
                        if (id == CheckId::HarnackII) exponent = harnack_exponent_ii(c, dist);
                        if (id == CheckId::HarnackPlain) exponent = detail::wang_exponent(p, dist, c.alpha);
                        const double e = std::exp(exponent);
                        const Estimate& u = vals[0][ix];
                        const Estimate& v = vals[1][iy];
                        const Estimate& m = moment[iy];
                        CheckReport r = row(id, method_name(plan.method));
                        r.s = s;
                        r.t = t;
                        r.p = p;
                        r.x = angle(nodes[ix]);
                        r.y = angle(nodes[iy]);
                        r.f = fid;
                        r.lhs = std::pow(u.value, p);
                        r.rhs = v.value * m.value * e;
                        detail::add_term(r.budget, p * std::pow(u.value, p - 1.0), u, plan.mc_factor);
                        detail::add_term(r.budget, m.value * e, v, plan.mc_factor);
                        if (id == CheckId::HarnackII) detail::add_term(r.budget, v.value * e, m, plan.mc_factor);
                        r.extras["exponent"] = exponent;
                        r.extras["distance"] = dist;
                        finalize(r);
                        out.rows.push_back(r);
                    }
                }
            }
        });
    }

    // ---- gradient estimate -------------------------------------------------

    std::vector<Task> gradient_tasks() const {
        const ParameterGrid& g = cfg_.grid_for(CheckId::Gradient);
        std::vector<Task> out;
        for (double s : g.s)
            for (double t : g.t)
                for (const auto& fid : g.functions) {
                    if (!(t > s)) continue;
                    out.push_back([=, this]() { return gradient_task(g, s, t, fid); });
                }
        return out;
    }

    /// |grad^s P^rho f|_s(x) by the Bismut estimator, frame-wise on the sphere.
    Estimate bismut_norm(double s, double t, const TestFunction& f, int node, std::uint64_t seed) const {
        EstimatorSettings st = cfg_.estimator;
        st.seed = seed;
        st.workers = inner_workers_;
        const Point x = grid_.point(node);
        if (!model_.is_sphere()) {
            const auto r = bismut_gradient(model_, s, t, x, Vec::Constant(1, std::exp(-model_.log_scale_at(s, x.coords[0]).f)),
                                           f, st, &profile_);
            return {std::abs(r.mean), r.std_error, 0.0};
        }
        const double a = std::sqrt(1.0 - 2.0 * s);
        Vec e1(2), e2(2);
        e1 << 1.0 / a, 0.0;
        e2 << 0.0, 1.0 / (a * std::sin(x.coords[0]));
        const auto r1 = bismut_gradient(model_, s, t, x, e1, f, st, &profile_);
        const auto r2 = bismut_gradient(model_, s, t, x, e2, f, st, &profile_);
        const double norm = std::hypot(r1.mean, r2.mean);
        const double se = norm > 0.0 ? (std::abs(r1.mean) * r1.std_error + std::abs(r2.mean) * r2.std_error) / norm
                                     : r1.std_error + r2.std_error;
        return {norm, se, 0.0};
    }

    CheckOutput gradient_task(const ParameterGrid& g, double s, double t, const std::string& fid) const {
        const std::string what = "gradient s=" + detail::g17(s) + " t=" + detail::g17(t) + " f=" + fid;
        return guarded(CheckId::Gradient, what, [&](CheckOutput& out) {
            const TestFunction f = TestFunction::parse(fid);
            require_nonnegative(f);
            require_bounded(s, t, true, false);
            const auto c = gradient_constants(profile_, s, t);
            const std::vector<int> nodes = nodes_of(g);
            std::vector<Integrand> gs{[](double, double d) { return d; }, [](double v, double) { return v; }};
            for (const Plan& plan : plans(f)) {
                const std::string key = "gradient" + detail::key_of({s, t}, fid);
                const auto vals = evaluate(plan.method, s, t, 1.0, f, gs, nodes, key);
                std::vector<Estimate> lhs(nodes.size());
                if (plan.method == Method::Oracle) {
                    const GridFunction gr = oracle_gradient(model_, s, t, f, cfg_.oracle);
                    for (std::size_t j = 0; j < nodes.size(); ++j) {
                        const auto i = static_cast<std::size_t>(nodes[j]);
                        lhs[j] = {gr.values[i], 0.0, gr.error[i]};
                    }
                } else {
                    for (std::size_t j = 0; j < nodes.size(); ++j)
                        lhs[j] = bismut_norm(s, t, f, nodes[j],
                                             detail::task_seed(cfg_.estimator.seed, key + "|bismut|" + std::to_string(nodes[j])));
                }
                for (std::size_t j = 0; j < nodes.size(); ++j) {
                    CheckReport r = row(CheckId::Gradient, method_name(plan.method));
                    r.s = s;
                    r.t = t;
                    r.x = angle(nodes[j]);
                    r.f = fid;
                    r.lhs = lhs[j].value;
                    r.rhs = gradient_bound_rhs(profile_, s, t, vals[0][j].value, vals[1][j].value);
                    detail::add_term(r.budget, 1.0, lhs[j], plan.mc_factor);
                    detail::add_term(r.budget, c.decay, vals[0][j], plan.mc_factor);
                    detail::add_term(r.budget, c.potential, vals[1][j], plan.mc_factor);
                    r.extras["decay"] = c.decay;
                    r.extras["potential_factor"] = c.potential;
                    finalize(r);
                    out.rows.push_back(r);
                }
            }
        });
    }

    // ---- semigroup log-Sobolev ---------------------------------------------

    std::vector<Task> logsob_semigroup_tasks() const {
        const ParameterGrid& g = cfg_.grid_for(CheckId::LogSobSemigroup);
        std::vector<Task> out;
        for (double s : g.s)
            for (double t : g.t)
                for (const auto& fid : g.functions) {
                    if (!(t > s)) continue;
                    out.push_back([=, this]() { return logsob_semigroup_task(g, s, t, fid); });
                }
        return out;
    }

    CheckOutput logsob_semigroup_task(const ParameterGrid& g, double s, double t, const std::string& fid) const {
        const std::string what = "logsob_semigroup s=" + detail::g17(s) + " t=" + detail::g17(t) + " f=" + fid;
        return guarded(CheckId::LogSobSemigroup, what, [&](CheckOutput& out) {
            const TestFunction f = TestFunction::parse(fid);
            require_bounded(s, t, true, true);
            const auto c = semigroup_logsob_constants(profile_, s, t);
            const std::vector<int> nodes = nodes_of(g);
            std::vector<Integrand> gs{[](double v, double) { return detail::xlogx(v * v); },
                                      [](double, double d) { return d * d; }, [](double v, double) { return v * v; }};
            for (const Plan& plan : plans(f)) {
                const std::string key = "logsob_semigroup" + detail::key_of({s, t}, fid);
                const auto vals = evaluate(plan.method, s, t, 1.0, f, gs, nodes, key);
                for (std::size_t j = 0; j < nodes.size(); ++j) {
                    const Estimate &a = vals[0][j], &b = vals[1][j], &d = vals[2][j];
                    CheckReport r = row(CheckId::LogSobSemigroup, method_name(plan.method));
                    r.s = s;
                    r.t = t;
                    r.x = angle(nodes[j]);
                    r.f = fid;
                    r.lhs = a.value;
                    r.rhs = logsob_semigroup_rhs(profile_, s, t, b.value, d.value);
                    detail::add_term(r.budget, 1.0, a, plan.mc_factor);
                    detail::add_term(r.budget, c.gradient_factor, b, plan.mc_factor);
                    const double slope = d.value > 0.0 ? std::log(d.value) + 1.0 + c.additive : c.additive;
                    detail::add_term(r.budget, slope, d, plan.mc_factor);
                    r.extras["gradient_factor"] = c.gradient_factor;
                    r.extras["additive"] = c.additive;
                    finalize(r);
                    out.rows.push_back(r);
                }
            }
        });
    }

    // ---- heat-kernel bound -------------------------------------------------

    std::vector<Task> kernel_tasks(CheckId id) const {
        const ParameterGrid& g = cfg_.grid_for(id);
        std::vector<Task> out;
        for (double t : g.t) out.push_back([=, this]() { return kernel_task(id, t); });
        return out;
    }

    /// Kernel on a half-resolution grid, interpolated to the nodes of `fine`.
    [[nodiscard]] std::vector<double> coarse_kernel_on(const KernelMatrix& fine, double s, double t,
                                                       bool conjugate) const {
        KernelOptions o = cfg_.kernel.options;
        o.nodes = o.max_nodes = fine.n / 2;
        const KernelMatrix coarse = kernel_matrix(model_, s, t, conjugate, o);
        const Grid1D cg(model_, coarse.n);
        const auto n = static_cast<std::size_t>(fine.n), m = static_cast<std::size_t>(coarse.n);
        std::vector<double> rows(m * n);
        std::vector<double> line(m);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) line[j] = coarse.entries[i * m + j];
            for (std::size_t j = 0; j < n; ++j) rows[i * n + j] = cg.interpolate(line, fine.nodes[j]);
        }
        std::vector<double> out(n * n);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < m; ++i) line[i] = rows[i * n + j];
            for (std::size_t i = 0; i < n; ++i) out[i * n + j] = cg.interpolate(line, fine.nodes[i]);
        }
        return out;
    }

    CheckOutput kernel_task(CheckId id, double t) const {
        const std::string what = to_string(id) + " t=" + detail::g17(t);
        return guarded(id, what, [&](CheckOutput& out) {
            if (cfg_.lhs == LhsMode::MonteCarlo) throw detail::NotApplicable("the kernel check needs the reference solver");
            const KernelBoundVariant variant = id == CheckId::KernelBoundCor1   ? KernelBoundVariant::ZeroVarrho
                                               : id == CheckId::KernelBoundCor2 ? KernelBoundVariant::ZeroPotential
                                                                                : KernelBoundVariant::General;
            const auto c = kernel_bound_constants(model_, profile_, t, variant);
            const KernelMatrix k = kernel_matrix(model_, 0.0, t, false, cfg_.kernel.options);
            const std::vector<double> kc = coarse_kernel_on(k, 0.0, t, false);
            const Grid1D kg(model_, k.n);
            const auto n = static_cast<std::size_t>(k.n);
            std::vector<double> bx(n), by(n);
            for (std::size_t i = 0; i < n; ++i) {
                bx[i] = model_.ball_volume(0.0, kg.point(static_cast<int>(i)), std::sqrt(t));
                by[i] = model_.ball_volume(t, kg.point(static_cast<int>(i)), std::sqrt(t));
            }
            for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(cfg_.kernel.row_stride)) {
                // The column closest to a violation once its error is granted.
                std::size_t worst = 0;
                double worst_slack = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < n; ++j) {
                    const double rhs = kernel_bound_from(c, bx[i], by[j]);
                    const double err = std::abs(k.entries[i * n + j] - kc[i * n + j]) / 3.0;
                    const double slack = rhs - k.entries[i * n + j] + err;
                    if (slack < worst_slack) {
                        worst_slack = slack;
                        worst = j;
                    }
                }
                CheckReport r = row(id, "oracle");
                r.s = 0.0;
                r.t = t;
                r.x = k.nodes[i];
                r.y = k.nodes[worst];
                r.lhs = k.entries[i * n + worst];
                r.rhs = kernel_bound_from(c, bx[i], by[worst]);
                r.budget.discretization = std::abs(k.entries[i * n + worst] - kc[i * n + worst]) / 3.0;
                r.extras["exponent"] = c.exponent;
                r.extras["nodes"] = static_cast<double>(k.n);
                finalize(r);
                out.rows.push_back(r);
            }
        });
    }

    // ---- measure log-Sobolev and supercontractivity --------------------------

    /// ||P^rho_{s,t}||_{(p,t)->(q,s)} from the discretized kernel at full and
    /// half resolution.
    [[nodiscard]] std::pair<double, double> opnorm_pair(double s, double t, double p, double q) const {
        const KernelMatrix k = kernel_matrix(model_, s, t, true, cfg_.kernel.options);
        KernelOptions o = cfg_.kernel.options;
        o.nodes = o.max_nodes = k.n / 2;
        const KernelMatrix kc = kernel_matrix(model_, s, t, true, o);
        return {opnorm_p_to_q(k, p, q).value, opnorm_p_to_q(kc, p, q).value};
    }

    [[nodiscard]] double opnorm_full(double s, double t, double p, double q) const {
        return opnorm_p_to_q(kernel_matrix(model_, s, t, true, cfg_.kernel.options), p, q).value;
    }

    std::vector<Task> logsob_measure_tasks() const {
        const ParameterGrid& g = cfg_.grid_for(CheckId::LogSobMeasure);
        std::vector<Task> out;
        for (double t : g.t)
            for (double r : g.r) out.push_back([=, this]() { return logsob_measure_task(g, t, r); });
        return out;
    }

    CheckOutput logsob_measure_task(const ParameterGrid& g, double t, double rr) const {
        const std::string what = "logsob_measure t=" + detail::g17(t) + " r=" + detail::g17(rr);
        return guarded(CheckId::LogSobMeasure, what, [&](CheckOutput& out) {
            if (cfg_.lhs == LhsMode::MonteCarlo)
                throw detail::NotApplicable("the measure log-Sobolev check needs the reference solver");
            require_bounded(0.0, t, true, true);
            const double p = cfg_.logsob.p, q = cfg_.logsob.q;
            const double weight = p * q / (q - p);
            double raw = 0.0, coarse = 0.0;
            const LogSobConstants c = logsob_constants(
                profile_, p, q, t, rr,
                [&](double s) {
                    if (!(t - s > 1e-6)) throw HypothesisViolation("gamma inverse reaches t; the norm is unbounded");
                    std::tie(raw, coarse) = opnorm_pair(s, t, p, q);
                    return cfg_.logsob.inflation * raw;
                },
                cfg_.logsob.variant);
            const double beta_err = weight * std::abs(std::log(raw) - std::log(coarse));
            for (const auto& fid : g.functions) {
                const TestFunction f = TestFunction::parse(fid);
                if (model_.is_sphere() && !f.is_zonal()) {
                    out.skipped.push_back({to_string(CheckId::LogSobMeasure),
                                           what + " f=" + fid + ": the sphere norm is computed on zonal functions"});
                    continue;
                }
                auto moments = [&](double tol) {
                    const double n2 = measure_integral(t, f, [](double v, double) { return v * v; }, tol);
                    const double ent = measure_integral(t, f, [](double v, double) { return detail::xlogx(v * v); }, tol);
                    const double grad = measure_integral(t, f, [](double, double d) { return d * d; }, tol);
                    return std::array<double, 3>{ent / n2 - std::log(n2), grad / n2, n2};
                };
                const auto fine = moments(1e-12);
                const auto rough = moments(1e-8);
                CheckReport r = row(CheckId::LogSobMeasure, "oracle");
                r.t = t;
                r.p = p;
                r.q = q;
                r.r = rr;
                r.f = fid;
                r.lhs = fine[0];
                r.rhs = rr * fine[1] + c.beta;
                r.budget.quadrature = std::abs(fine[0] - rough[0]) + rr * std::abs(fine[1] - rough[1]);
                r.budget.discretization = beta_err;
                r.extras["beta"] = c.beta;
                r.extras["beta_tilde"] = c.beta_tilde;
                r.extras["gamma_inv"] = c.gamma_inv;
                r.extras["gamma"] = c.gamma;
                r.extras["opnorm"] = raw;
                r.extras["opnorm_half_resolution"] = coarse;
                r.extras["inflation"] = cfg_.logsob.inflation;
                r.extras["r_too_large"] = c.r_too_large ? 1.0 : 0.0;
                r.extras["norm_squared"] = fine[2];
                // Margin if the norm estimate were inflated by another factor.
                for (double factor : cfg_.logsob.sensitivity) {
                    const double beta_alt = c.beta + weight * (std::log(factor) - std::log(cfg_.logsob.inflation));
                    r.extras["margin_at_inflation_" + detail::g17(factor)] = rr * fine[1] + beta_alt - fine[0];
                }
                finalize(r);
                out.rows.push_back(r);
            }
        });
    }

    std::vector<Task> supercontractivity_tasks() const {
        const ParameterGrid& g = cfg_.grid_for(CheckId::Supercontractivity);
        std::vector<Task> out;
        for (double s : g.s)
            for (double t : g.t)
                for (double p : g.p)
                    for (double q : g.q) {
                        if (!(t > s) || !(q > p)) continue;
                        out.push_back([=, this]() { return supercontractivity_task(s, t, p, q); });
                    }
        return out;
    }

    CheckOutput supercontractivity_task(double s, double t, double p, double q) const {
        const std::string what = "supercontractivity s=" + detail::g17(s) + " t=" + detail::g17(t) +
                                 " p=" + detail::g17(p) + " q=" + detail::g17(q);
        return guarded(CheckId::Supercontractivity, what, [&](CheckOutput& out) {
            if (cfg_.lhs == LhsMode::MonteCarlo)
                throw detail::NotApplicable("the supercontractivity check needs the reference solver");
            require_bounded(s, t, true, true);
            const double r = supercontractive_r(p, q, s, t);
            const double p0 = cfg_.logsob.p, q0 = cfg_.logsob.q;
            // beta_u(r) on a uniform table in u, reused by the refined table.
            std::map<double, double> beta_table;
            auto beta_at_node = [&](double u) {
                auto it = beta_table.find(u);
                if (it != beta_table.end()) return it->second;
                const LogSobConstants c = logsob_constants(
                    profile_, p0, q0, u, r,
                    [&](double sp) {
                        if (!(u - sp > 1e-6)) throw HypothesisViolation("beta_u(r) is unbounded at u = " + detail::g17(u));
                        return cfg_.logsob.inflation * opnorm_full(sp, u, p0, q0);
                    },
                    cfg_.logsob.variant);
                beta_table[u] = c.beta;
                return c.beta;
            };
            auto bound_with = [&](int nodes) {
                std::vector<double> us(static_cast<std::size_t>(nodes)), bs(static_cast<std::size_t>(nodes));
                for (int k = 0; k < nodes; ++k) {
                    us[static_cast<std::size_t>(k)] = s + (t - s) * k / (nodes - 1);
                    bs[static_cast<std::size_t>(k)] = beta_at_node(us[static_cast<std::size_t>(k)]);
                }
                auto beta = [&](double u) {
                    const double x = (u - s) / (t - s) * (nodes - 1);
                    const int k = std::clamp(static_cast<int>(std::floor(x)), 0, nodes - 2);
                    const double w = x - k;
                    return (1.0 - w) * bs[static_cast<std::size_t>(k)] + w * bs[static_cast<std::size_t>(k + 1)];
                };
                return supercontractive_bound(profile_, beta, p, q, s, t);
            };
            const int nb = cfg_.logsob.beta_nodes;
            const double rhs = bound_with(2 * nb - 1);
            const double rhs_rough = bound_with(nb);
            const auto [norm, norm_coarse] = opnorm_pair(s, t, p, q);
            CheckReport row_ = row(CheckId::Supercontractivity, "oracle");
            row_.s = s;
            row_.t = t;
            row_.p = p;
            row_.q = q;
            row_.r = r;
            row_.lhs = norm;
            row_.rhs = rhs;
            row_.budget.discretization = std::abs(norm - norm_coarse);
            row_.budget.quadrature = std::abs(rhs - rhs_rough);
            row_.extras["opnorm_half_resolution"] = norm_coarse;
            row_.extras["bound_coarse_table"] = rhs_rough;
            finalize(row_);
            out.rows.push_back(row_);
        });
    }

    // ---- duality of the evolution system of measures -------------------------

    std::vector<Task> duality_tasks() const {
        const ParameterGrid& g = cfg_.grid_for(CheckId::Duality);
        std::vector<Task> out;
        for (double s : g.s)
            for (double t : g.t)
                for (const auto& fid : g.functions) {
                    if (!(t > s)) continue;
                    out.push_back([=, this]() { return duality_task(s, t, fid); });
                }
        return out;
    }

    /// mu_s(P^rho_{s,t} f) by Monte Carlo with starting points drawn from mu_s.
    Estimate duality_monte_carlo(double s, double t, const TestFunction& f, std::uint64_t seed) const {
        const EstimatorSettings& st = cfg_.estimator;
        model_.check_time(s);
        model_.check_time(t);
        const PathEngine engine(model_, false, st.q_integrator);
        const double total = model_.total_measure(s);
        auto moments = detail::run_samples(st.n_paths, 1, inner_workers_, [&](std::size_t i, double* out) {
            PathRng start(detail::splitmix64(seed), i);
            Point x;
            double weight = total;
            if (model_.is_sphere()) {
                const double z = 2.0 * detail::to_uniform(start.normal()) - 1.0;
                const double az = kTwoPi * detail::to_uniform(start.normal());
                const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
                const Eigen::Vector3d p(rho * std::cos(az), rho * std::sin(az), z);
                x = EvolvingModel::from_ambient(p, std::abs(z) > 0.9 ? 1 : 0);
            } else {
                const double th = kTwoPi * detail::to_uniform(start.normal());
                x = Point::circle(th);
                weight = kTwoPi * model_.mu_density(s, x);
            }
            const PathState end = run_path(engine, s, t, x, st.dt, PathRng(seed, i), 1.0, i);
            out[0] = weight * std::exp(-end.fk_exponent) * f.value(model_, end.x);
        });
        const EstimatorResult r = detail::to_result(moments[0], st);
        return {r.mean, r.std_error, 0.0};
    }

    CheckOutput duality_task(double s, double t, const std::string& fid) const {
        const std::string what = "duality s=" + detail::g17(s) + " t=" + detail::g17(t) + " f=" + fid;
        return guarded(CheckId::Duality, what, [&](CheckOutput& out) {
            const TestFunction f = TestFunction::parse(fid);
            auto value = [](double v, double) { return v; };
            const double exact_t = measure_integral(t, f, value, 1e-12);
            for (const Plan& plan : plans(f)) {
                CheckReport r = row(CheckId::Duality, method_name(plan.method));
                r.s = s;
                r.t = t;
                r.f = fid;
                if (plan.method == Method::Oracle) {
                    const GridFunction u = oracle(s, t, 1.0, f, value);
                    const std::vector<double> ws = grid_.weights(s), wt = grid_.weights(t);
                    const std::vector<double> ft = sample(f, t, value);
                    double lhs = 0.0, rhs = 0.0, err = 0.0, mass = 0.0;
                    for (std::size_t i = 0; i < ws.size(); ++i) {
                        lhs += ws[i] * u.values[i];
                        rhs += wt[i] * ft[i];
                        err += ws[i] * u.error[i];
                        mass += std::abs(ws[i] * u.values[i]) + std::abs(wt[i] * ft[i]);
                    }
                    // Rounding: one relative epsilon per node sum and per implicit step.
                    const double steps = std::ceil((t - s) / cfg_.oracle.max_step);
                    const double rounding =
                        (static_cast<double>(ws.size()) + 4.0 * steps) * std::numeric_limits<double>::epsilon() * mass;
                    r.lhs = lhs;
                    r.rhs = rhs;
                    r.budget.discretization = err + rounding;
                    r.extras["rounding"] = rounding;
                    r.budget.quadrature = std::abs(rhs - exact_t);
                } else {
                    const Estimate e = duality_monte_carlo(s, t, f, detail::task_seed(cfg_.estimator.seed,
                                                                                     "duality" + detail::key_of({s, t}, fid)));
                    r.lhs = e.value;
                    r.rhs = exact_t;
                    r.budget.statistical = plan.mc_factor * e.std_error;
                }
                r.extras["mu_t_quadrature"] = exact_t;
                finalize(r, true);
                out.rows.push_back(r);
            }
        });
    }

    // ---- martingale property -----------------------------------------------

    std::vector<Task> martingale_tasks() const {
        const ParameterGrid& g = cfg_.grid_for(CheckId::Martingale);
        std::vector<Task> out;
        for (double s : g.s)
            for (double t : g.t)
                for (const auto& fid : g.functions)
                    for (double a : g.points) {
                        if (!(t > s)) continue;
                        out.push_back([=, this]() { return martingale_task(g, s, t, fid, a); });
                    }
        return out;
    }

    CheckOutput martingale_task(const ParameterGrid& g, double s, double t, const std::string& fid, double a) const {
        const std::string what = "martingale s=" + detail::g17(s) + " t=" + detail::g17(t) + " f=" + fid;
        return guarded(CheckId::Martingale, what, [&](CheckOutput& out) {
            const TestFunction f = TestFunction::parse(fid);
            if (!oracle_ok(f)) throw OracleUnavailable("the candidate solution comes from the reference solver");
            if (cfg_.lhs == LhsMode::OracleOnly) throw detail::NotApplicable("the martingale check is a Monte Carlo check");
            std::vector<double> times{s};
            for (double frac : g.checkpoints) times.push_back(s + frac * (t - s));
            const auto snaps =
                solve_snapshots(model_, s, t, sample(f, t, [](double v, double) { return v; }), 1.0, times, cfg_.oracle);
            auto index_of = [&](double r) {
                for (std::size_t k = 0; k < times.size(); ++k)
                    if (times[k] == r) return k;
                throw InvalidArgument("checkpoint not on the snapshot list");
            };
            auto u_hat = [&](double r, const Point& y) {
                return grid_.interpolate(snaps[index_of(r)].values, model_.standard_angle(y));
            };
            const int node = node_index(a);
            EstimatorSettings st = cfg_.estimator;
            st.seed = detail::task_seed(cfg_.estimator.seed, "martingale" + detail::key_of({s, t, a}, fid));
            st.workers = inner_workers_;
            const std::vector<double> checkpoints(times.begin() + 1, times.end());
            const auto res = martingale_diagnostic(model_, s, t, grid_.point(node), checkpoints, u_hat, st);
            const auto i0 = static_cast<std::size_t>(node);
            const double target = snaps[0].values[i0];
            for (std::size_t k = 0; k < checkpoints.size(); ++k) {
                const double r_k = checkpoints[k];
                CheckReport r = row(CheckId::Martingale, "mc");
                r.s = s;
                r.t = t;
                r.r = r_k;
                r.x = angle(node);
                r.f = fid;
                r.lhs = res[k].mean;
                r.rhs = target;
                r.budget.statistical = 3.0 * res[k].std_error;
                // A solver error e in u(r, .) moves the mean by at most e E[exp(-int varrho)].
                const double damping = std::exp(sup_rho_minus_integral(profile_, s, r_k));
                r.budget.discretization = snaps[k + 1].max_error() * damping + snaps[0].error[i0];
                r.extras["checkpoint"] = r_k;
                finalize(r, true);
                out.rows.push_back(r);
            }
        });
    }

    ExperimentConfig cfg_;
    EvolvingModel model_;
    BoundProfile profile_;
    Grid1D grid_;
    mutable unsigned inner_workers_ = 1;
};

/// Rows of one check for the configured grids.
inline CheckOutput run_check(const ExperimentConfig& cfg, CheckId id) { return CheckRunner(cfg).run({id}); }

/// Every configured check, assembled into a report table.
inline ReportTable sweep(const ExperimentConfig& cfg, const std::vector<CheckId>& ids) {
    const CheckOutput out = CheckRunner(cfg).run(ids);
    ReportTable table;
    table.config = cfg.name;
    table.model = cfg.model_id();
    table.seed = cfg.estimator.seed;
    table.rows = out.rows;
    table.skipped = out.skipped;
    return table;
}

inline ReportTable sweep(const ExperimentConfig& cfg) { return sweep(cfg, cfg.checks); }

}  // namespace evoheat
