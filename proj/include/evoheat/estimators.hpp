#pragma once

// Monte Carlo engines for the L_t-diffusion
//   dX = U o dB - grad phi dt,   dB with covariance 2 dt Id,
// the plain and Feynman-Kac semigroups, the Bismut-type gradient
// (dP^rho f)(v) = E[e^{-int rho} (df(//Q v)(X_t) - f(X_t) int d rho(//Q v) dr)],
// endpoint densities and martingale diagnostics.

#include "evoheat/errors.hpp"
#include "evoheat/geometry.hpp"
#include "evoheat/profile.hpp"
#include "evoheat/rng.hpp"
#include "evoheat/test_functions.hpp"
#include "evoheat/transport.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <thread>
#include <vector>

namespace evoheat {

struct EstimatorSettings {
    std::size_t n_paths = 10000;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    bool antithetic = false;
    double max_dt = 0.05;
    Integrator q_integrator = Integrator::Heun;
};

struct EstimatorResult {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
};

/// One discretized path: position, transported frame, damping matrix and
/// the running Feynman-Kac and Bismut integrals.
struct PathState {
    Point x;
    Frame frame;
    DampingMatrix q;
    double fk_exponent = 0.0;
    RowVec bismut_accum;  // int d rho(U q .) dr, in initial-frame coordinates
    double t = 0.0;
    std::uint64_t stream = 0;
    LocalGeometry geo;  // geometry at (t, x)
};

class PathEngine {
public:
    PathEngine(const EvolvingModel& model, bool track_frame, Integrator q_integrator = Integrator::Heun)
        : model_(&model), track_frame_(track_frame), integrator_(q_integrator) {}

    [[nodiscard]] const EvolvingModel& model() const { return *model_; }
    [[nodiscard]] bool tracks_frame() const { return track_frame_; }

    [[nodiscard]] PathState start(double s, Point x0, std::uint64_t stream = 0) const {
        const EvolvingModel& m = *model_;
        if (m.is_sphere() && m.needs_rechart(x0)) x0 = m.rechart(x0);
        PathState st;
        st.x = x0;
        st.t = s;
        st.stream = stream;
        st.geo = m.local(s, x0);
        st.frame = {orthonormalize(Mat::Identity(m.dim(), m.dim()), st.geo.g), s};
        st.q = DampingMatrix::identity(m.dim(), s);
        st.bismut_accum = RowVec::Zero(m.dim());
        return st;
    }

    /// Advances by dt with standard normal input xi (length dim).
    void step(PathState& st, const Vec& xi, double dt) const {
        const EvolvingModel& m = *model_;
        const int dim = m.dim();
        const LocalGeometry& geo = st.geo;
        const Mat U = track_frame_ ? st.frame.columns : orthonormalize(Mat::Identity(dim, dim), geo.g);

        const Vec dx = std::sqrt(2.0 * dt) * (U * xi) + dt * geo.drift();
        Point y = st.x;
        for (int i = 0; i < dim; ++i) y.coords[static_cast<std::size_t>(i)] += dx(i);
        const double t1 = st.t + dt;

        Frame next_frame;
        if (track_frame_) next_frame = transport_step(m, st.frame, st.x, dx, st.t, dt);

        Point yc = y;
        if (m.is_sphere()) {
            const bool outside = y.coords[0] < m.pole_margin() || y.coords[0] > std::numbers::pi - m.pole_margin();
            if (outside || m.needs_rechart(y)) {
                const Eigen::Vector3d p = m.embed(y);
                const Point a = EvolvingModel::from_ambient(p, 0), b = EvolvingModel::from_ambient(p, 1);
                yc = std::abs(std::cos(a.coords[0])) <= std::abs(std::cos(b.coords[0])) ? a : b;
                if (track_frame_) next_frame.columns = m.rechart_vectors(y, yc, next_frame.columns);
            } else {
                yc = Point::sphere(y.coords[0], y.coords[1], y.chart);
            }
        } else {
            yc = Point::circle(y.coords[0]);
        }

        LocalGeometry next_geo = m.local(t1, yc);
        st.fk_exponent += 0.5 * dt * (geo.varrho + next_geo.varrho);

        if (track_frame_) {
            const Mat a_now = pulled_back_tensor(geo, st.frame.columns);
            const Mat a_next = pulled_back_tensor(next_geo, next_frame.columns);
            const DampingMatrix q_next = q_step(st.q, a_now, a_next, dt, integrator_);
            const RowVec b_now = geo.d_varrho.transpose() * st.frame.columns * st.q.Q;
            const RowVec b_next = next_geo.d_varrho.transpose() * next_frame.columns * q_next.Q;
            st.bismut_accum += 0.5 * dt * (b_now + b_next);
            st.q = q_next;
            st.frame = next_frame;
        }
        st.frame.t = t1;
        st.x = yc;
        st.t = t1;
        st.geo = std::move(next_geo);
    }

private:
    const EvolvingModel* model_;
    bool track_frame_;
    Integrator integrator_;
};

namespace detail {

inline void check_step(double dt, double max_dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive and finite");
    if (dt > max_dt) throw StepTooLarge("dt " + std::to_string(dt) + " exceeds the configured maximum " +
                                        std::to_string(max_dt));
}

inline std::size_t step_count(double s, double t, double dt) {
    if (t <= s) return 0;
    return static_cast<std::size_t>(std::ceil((t - s) / dt - 1e-9));
}

/// Welford moments, merged in a fixed order.
struct Moments {
    double n = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double v) {
        n += 1.0;
        const double d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }

    void merge(const Moments& o) {
        if (o.n == 0.0) return;
        if (n == 0.0) {
            *this = o;
            return;
        }
        const double total = n + o.n;
        const double d = o.mean - mean;
        mean += d * o.n / total;
        m2 += o.m2 + d * d * n * o.n / total;
        n = total;
    }
};

inline constexpr std::size_t kChunk = 256;

/// Runs fn(sample_index, out) for every sample with out of length n_values.
/// Work is split in fixed chunks; chunk moments are merged by chunk index so
/// the result is independent of the worker count.
template <class Fn>
std::vector<Moments> run_samples(std::size_t n_samples, std::size_t n_values, unsigned workers, Fn&& fn) {
    const std::size_t n_chunks = (n_samples + kChunk - 1) / kChunk;
    std::vector<std::vector<Moments>> per_chunk(n_chunks, std::vector<Moments>(n_values));
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        std::vector<double> out(n_values);
        for (std::size_t c = next++; c < n_chunks; c = next++) {
            const std::size_t hi = std::min(n_samples, (c + 1) * kChunk);
            for (std::size_t i = c * kChunk; i < hi; ++i) {
                fn(i, out.data());
                for (std::size_t k = 0; k < n_values; ++k) per_chunk[c][k].add(out[k]);
            }
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_chunks)));
    if (n_threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (unsigned w = 0; w < n_threads; ++w)
            pool.emplace_back([&]() {
                try {
                    work();
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = n_chunks;
                }
            });
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }
    std::vector<Moments> total(n_values);
    for (const auto& chunk : per_chunk)
        for (std::size_t k = 0; k < n_values; ++k) total[k].merge(chunk[k]);
    return total;
}

inline EstimatorResult to_result(const Moments& m, const EstimatorSettings& settings) {
    EstimatorResult r;
    r.mean = m.mean;
    r.std_error = m.n > 1.0 ? std::sqrt(m.m2 / (m.n - 1.0) / m.n) : 0.0;
    r.n_paths = static_cast<std::size_t>(m.n) * (settings.antithetic ? 2 : 1);
    r.dt = settings.dt;
    r.seed = settings.seed;
    return r;
}

}  // namespace detail

/// Runs one path from (s, x0) to t. `sign` = -1 gives the antithetic partner.
/// The observer, when set, sees the state after every step.
inline PathState run_path(const PathEngine& engine, double s, double t, const Point& x0, double dt, PathRng rng,
                          double sign = 1.0, std::uint64_t stream = 0,
                          const std::function<void(const PathState&)>& observer = {}) {
    PathState st = engine.start(s, x0, stream);
    const std::size_t n = detail::step_count(s, t, dt);
    const int dim = engine.model().dim();
    Vec xi(dim);
    for (std::size_t k = 0; k < n; ++k) {
        const double h = (k + 1 == n) ? (t - s) - static_cast<double>(n - 1) * dt : dt;
        for (int i = 0; i < dim; ++i) xi(i) = sign * rng.normal();
        engine.step(st, xi, h);
        if (observer) observer(st);
    }
    return st;
}

/// Full trajectory (initial state plus one state per step) of path `stream`.
inline std::vector<PathState> simulate_path(const EvolvingModel& model, double s, double t, const Point& x0,
                                            double dt, std::uint64_t seed, std::uint64_t stream,
                                            double max_dt = 0.05, bool track_frame = true) {
    model.check_time(s);
    model.check_time(t);
    if (t < s) throw InvalidArgument("simulate_path requires s <= t");
    detail::check_step(dt, max_dt);
    const PathEngine engine(model, track_frame);
    std::vector<PathState> out{engine.start(s, x0, stream)};
    run_path(engine, s, t, x0, dt, PathRng(seed, stream), 1.0, stream,
             [&](const PathState& st) { out.push_back(st); });
    return out;
}

namespace detail {

/// Generic driver: per-path values from the final state (and optional
/// observer); antithetic pairs are averaged into one sample.
template <class Value>
std::vector<EstimatorResult> estimate(const EvolvingModel& model, double s, double t, const Point& x,
                                      std::size_t n_values, bool track_frame, const EstimatorSettings& settings,
                                      Value&& value) {
    model.check_time(s);
    model.check_time(t);
    if (t < s) throw InvalidArgument("estimators require s <= t");
    check_step(settings.dt, settings.max_dt);
    if (settings.n_paths == 0) throw InvalidArgument("n_paths must be positive");
    const PathEngine engine(model, track_frame, settings.q_integrator);
    const std::size_t n_samples = settings.antithetic ? std::max<std::size_t>(1, settings.n_paths / 2)
                                                      : settings.n_paths;
    auto moments = run_samples(n_samples, n_values, settings.workers, [&](std::size_t i, double* out) {
        const PathState a = run_path(engine, s, t, x, settings.dt, PathRng(settings.seed, i), 1.0, i);
        value(a, out);
        if (settings.antithetic) {
            std::vector<double> partner(n_values);
            const PathState b = run_path(engine, s, t, x, settings.dt, PathRng(settings.seed, i), -1.0, i);
            value(b, partner.data());
            for (std::size_t k = 0; k < n_values; ++k) out[k] = 0.5 * (out[k] + partner[k]);
        }
    });
    std::vector<EstimatorResult> out;
    out.reserve(n_values);
    for (const auto& m : moments) out.push_back(to_result(m, settings));
    return out;
}

}  // namespace detail

/// P_{s,t} f(x) = E[f(X_t)].
inline EstimatorResult semigroup(const EvolvingModel& model, double s, double t, const Point& x,
                                 const TestFunction& f, const EstimatorSettings& settings) {
    return detail::estimate(model, s, t, x, 1, false, settings, [&](const PathState& st, double* out) {
        out[0] = f.value(model, st.x);
    })[0];
}

/// P^rho_{s,t} f(x) = E[exp(-int_s^t rho(X_r) dr) f(X_t)].
inline EstimatorResult feynman_kac(const EvolvingModel& model, double s, double t, const Point& x,
                                   const TestFunction& f, const EstimatorSettings& settings) {
    return detail::estimate(model, s, t, x, 1, false, settings, [&](const PathState& st, double* out) {
        out[0] = std::exp(-st.fk_exponent) * f.value(model, st.x);
    })[0];
}

/// Several functions on common paths; `conjugate` selects the Feynman-Kac weight.
inline std::vector<EstimatorResult> semigroup_many(const EvolvingModel& model, double s, double t, const Point& x,
                                                   const std::vector<TestFunction>& fs, bool conjugate,
                                                   const EstimatorSettings& settings) {
    return detail::estimate(model, s, t, x, fs.size(), false, settings, [&](const PathState& st, double* out) {
        const double w = conjugate ? std::exp(-st.fk_exponent) : 1.0;
        for (std::size_t k = 0; k < fs.size(); ++k) out[k] = w * fs[k].value(model, st.x);
    });
}

/// E[exp(-lambda int_s^t rho(X_r) dr)].
inline EstimatorResult fk_moment(const EvolvingModel& model, double s, double t, const Point& x, double lambda,
                                 const EstimatorSettings& settings) {
    return detail::estimate(model, s, t, x, 1, false, settings, [&](const PathState& st, double* out) {
        out[0] = std::exp(-lambda * st.fk_exponent);
    })[0];
}

/// Estimates (dP^rho_{s,t} f)(v) for a chart tangent vector v at x.
inline EstimatorResult bismut_gradient(const EvolvingModel& model, double s, double t, const Point& x,
                                       const Vec& v, const TestFunction& f, const EstimatorSettings& settings,
                                       const BoundProfile* profile = nullptr) {
    if (profile != nullptr) {
        for (int i = 0; i <= 16; ++i) {
            const double r = s + (t - s) * i / 16.0;
            if (!std::isfinite(profile->kappa(r)))
                throw HypothesisViolation("|d varrho| is not bounded on [s, t]");
        }
    }
    Point x0 = x;
    Vec v0 = v;
    if (model.is_sphere() && model.needs_rechart(x)) {
        x0 = model.rechart(x);
        v0 = model.rechart_vectors(x, x0, v);
    }
    const PathEngine probe(model, true);
    const PathState init = probe.start(s, x0);
    // Probe vector in initial-frame coordinates: w = U_s^T g_s v.
    const Vec w = init.frame.columns.transpose() * init.geo.g * v0;
    return detail::estimate(model, s, t, x0, 1, true, settings, [&](const PathState& st, double* out) {
        const FunctionJet jet = f.jet(model, st.x);
        const Vec direction = st.frame.columns * (st.q.Q * w);
        const double correction = (st.bismut_accum * w)(0, 0);
        out[0] = std::exp(-st.fk_exponent) * (jet.differential.dot(direction) - jet.value * correction);
    })[0];
}

/// Binned endpoint density with respect to mu_t over the standard angle.
struct KernelDensity {
    std::vector<double> edges;
    std::vector<std::optional<EstimatorResult>> density;  // nullopt marks an empty bin
};

inline double standard_bin_measure(const EvolvingModel& model, double t, double lo, double hi) {
    if (model.is_sphere()) return model.measure_mu(t, Region{lo, hi, 0.0, kTwoPi});
    return model.measure_mu(t, Region{lo, hi, 0.0, 0.0});
}

inline KernelDensity kernel_density(const EvolvingModel& model, double s, double t, const Point& x,
                                    std::size_t bins, bool conjugate, const EstimatorSettings& settings) {
    if (bins == 0) throw InvalidArgument("bins must be positive");
    const double span = model.is_sphere() ? std::numbers::pi : kTwoPi;
    KernelDensity out;
    for (std::size_t b = 0; b <= bins; ++b) out.edges.push_back(span * static_cast<double>(b) / static_cast<double>(bins));
    std::vector<double> bin_mu(bins);
    for (std::size_t b = 0; b < bins; ++b) bin_mu[b] = standard_bin_measure(model, t, out.edges[b], out.edges[b + 1]);

    auto results = detail::estimate(model, s, t, x, bins, false, settings, [&](const PathState& st, double* o) {
        std::fill(o, o + bins, 0.0);
        const double a = model.standard_angle(st.x);
        auto b = static_cast<std::size_t>(std::floor(a / span * static_cast<double>(bins)));
        b = std::min(b, bins - 1);
        o[b] = (conjugate ? std::exp(-st.fk_exponent) : 1.0) / bin_mu[b];
    });
    // A bin no path reached has mean and standard error exactly zero.
    for (std::size_t b = 0; b < bins; ++b) {
        if (results[b].mean == 0.0 && results[b].std_error == 0.0) {
            out.density.emplace_back(std::nullopt);
        } else {
            out.density.emplace_back(results[b]);
        }
    }
    return out;
}

/// Means of exp(-int_s^r rho) u_hat(r, X_r) at each checkpoint r.
inline std::vector<EstimatorResult> martingale_diagnostic(
    const EvolvingModel& model, double s, double t, const Point& x, const std::vector<double>& checkpoints,
    const std::function<double(double, const Point&)>& u_hat, const EstimatorSettings& settings) {
    for (double r : checkpoints)
        if (r < s || r > t) throw InvalidArgument("checkpoints must lie in [s, t]");
    model.check_time(s);
    model.check_time(t);
    detail::check_step(settings.dt, settings.max_dt);
    const PathEngine engine(model, false, settings.q_integrator);
    const std::size_t m = checkpoints.size();
    const std::size_t n_samples = settings.antithetic ? std::max<std::size_t>(1, settings.n_paths / 2)
                                                      : settings.n_paths;
    // Checkpoints are honoured on the step grid: the run is split at each r.
    auto one = [&](std::size_t i, double sign, double* out) {
        PathRng rng(settings.seed, i);
        PathState st = engine.start(s, x, i);
        const int dim = model.dim();
        Vec xi(dim);
        std::vector<std::size_t> order(m);
        for (std::size_t k = 0; k < m; ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return checkpoints[a] < checkpoints[b]; });
        for (std::size_t idx : order) {
            const double r = checkpoints[idx];
            while (st.t < r - 1e-12) {
                const double h = std::min(settings.dt, r - st.t);
                for (int d = 0; d < dim; ++d) xi(d) = sign * rng.normal();
                engine.step(st, xi, h);
            }
            out[idx] = std::exp(-st.fk_exponent) * u_hat(r, st.x);
        }
    };
    auto moments = detail::run_samples(n_samples, m, settings.workers, [&](std::size_t i, double* out) {
        one(i, 1.0, out);
        if (settings.antithetic) {
            std::vector<double> partner(m);
            one(i, -1.0, partner.data());
            for (std::size_t k = 0; k < m; ++k) out[k] = 0.5 * (out[k] + partner[k]);
        }
    });
    std::vector<EstimatorResult> out;
    for (const auto& mo : moments) out.push_back(detail::to_result(mo, settings));
    return out;
}

/// E[w f(X^{dt/2}_t)] - E[w f(X^{dt}_t)] with both levels driven by the same
/// Brownian path (coarse increments are sums of fine pairs).
inline EstimatorResult coupled_level_difference(const EvolvingModel& model, double s, double t, const Point& x,
                                                const TestFunction& f, double dt_coarse, bool conjugate,
                                                const EstimatorSettings& settings) {
    model.check_time(s);
    model.check_time(t);
    detail::check_step(dt_coarse, settings.max_dt);
    const std::size_t n = detail::step_count(s, t, dt_coarse);
    if (std::abs(static_cast<double>(n) * dt_coarse - (t - s)) > 1e-9)
        throw InvalidArgument("coupled levels need dt_coarse dividing t - s");
    const PathEngine engine(model, false, settings.q_integrator);
    const int dim = model.dim();
    const double fine = 0.5 * dt_coarse;
    auto moments = detail::run_samples(settings.n_paths, 1, settings.workers, [&](std::size_t i, double* out) {
        PathRng rng(settings.seed, i);
        PathState coarse = engine.start(s, x, i), finer = engine.start(s, x, i);
        Vec xi1(dim), xi2(dim), xic(dim);
        for (std::size_t k = 0; k < n; ++k) {
            for (int d = 0; d < dim; ++d) xi1(d) = rng.normal();
            for (int d = 0; d < dim; ++d) xi2(d) = rng.normal();
            xic = (xi1 + xi2) / std::sqrt(2.0);
            engine.step(finer, xi1, fine);
            engine.step(finer, xi2, fine);
            engine.step(coarse, xic, dt_coarse);
        }
        const double wf = conjugate ? std::exp(-finer.fk_exponent) : 1.0;
        const double wc = conjugate ? std::exp(-coarse.fk_exponent) : 1.0;
        out[0] = wf * f.value(model, finer.x) - wc * f.value(model, coarse.x);
    });
    EstimatorSettings reported = settings;
    reported.dt = dt_coarse;
    reported.antithetic = false;
    return detail::to_result(moments[0], reported);
}

}  // namespace evoheat
