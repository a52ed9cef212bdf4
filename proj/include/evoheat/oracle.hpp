#pragma once

// Deterministic 1-D reference solver.
//
// Circles are solved on the periodic grid theta_i = 2 pi i / n; the sphere is
// reduced to zonal functions on cells of equal polar width, with zero flux
// through the poles. Both use the conservative finite-volume form
//   L u = (1/m) d/da (c du/da),
// m the mu_t density per unit angle. Weights w_i(t) satisfy
// d/dt w_i = -varrho_t w_i exactly, so the conjugate scheme
//   W_n u_n - theta dt A_n u_n = W_{n+1} u_{n+1} + (1 - theta) dt A_{n+1} u_{n+1}
// preserves sum_i w_i(s) u_i(s) = sum_i w_i(t) f_i to rounding.

#include "evoheat/errors.hpp"
#include "evoheat/geometry.hpp"
#include "evoheat/test_functions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace evoheat {

struct OracleOptions {
    int nodes = 512;
    double max_step = 1e-3;
    bool time_richardson = true;
    bool spatial_estimate = true;
};

class Grid1D {
public:
    Grid1D(const EvolvingModel& model, int n) : model_(model), n_(n) {
        if (n < 8) throw InvalidArgument("oracle grid needs at least 8 nodes");
        if (model.is_sphere() && !model.potential().is_spatially_constant())
            throw OracleUnavailable("sphere reduction needs a spatially constant potential");
        const double span = model.is_sphere() ? std::numbers::pi : kTwoPi;
        h_ = span / n;
        nodes_.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) nodes_[static_cast<std::size_t>(i)] = model.is_sphere() ? (i + 0.5) * h_ : i * h_;
    }

    [[nodiscard]] const EvolvingModel& model() const { return model_; }
    [[nodiscard]] bool periodic() const { return !model_.is_sphere(); }
    [[nodiscard]] int size() const { return n_; }
    [[nodiscard]] double spacing() const { return h_; }
    [[nodiscard]] const std::vector<double>& nodes() const { return nodes_; }

    /// Grid point as a model point (sphere: azimuth 0, chart 0).
    [[nodiscard]] Point point(int i) const {
        const double a = nodes_[static_cast<std::size_t>(i)];
        return model_.is_sphere() ? Point::sphere(a, 0.0) : Point::circle(a);
    }

    /// mu_t quadrature weights.
    [[nodiscard]] std::vector<double> weights(double t) const {
        std::vector<double> w(static_cast<std::size_t>(n_));
        if (model_.is_sphere()) {
            const double scale = kTwoPi * std::exp(-model_.potential().value(t, 0.0)) * (1.0 - 2.0 * t);
            for (int i = 0; i < n_; ++i)
                w[static_cast<std::size_t>(i)] = scale * (std::cos(i * h_) - std::cos((i + 1) * h_));
        } else {
            for (int i = 0; i < n_; ++i)
                w[static_cast<std::size_t>(i)] = model_.mu_density(t, point(i)) * h_;
        }
        return w;
    }

    /// Conductance of the face between node i and node i+1 (wrapping on
    /// circles; the last sphere face is the south pole and carries no flux).
    [[nodiscard]] std::vector<double> conductance(double t) const {
        std::vector<double> c(static_cast<std::size_t>(n_));
        if (model_.is_sphere()) {
            const double scale = kTwoPi * std::exp(-model_.potential().value(t, 0.0)) / h_;
            for (int i = 0; i < n_; ++i) c[static_cast<std::size_t>(i)] = scale * std::sin((i + 1) * h_);
            c[static_cast<std::size_t>(n_ - 1)] = 0.0;
        } else {
            for (int i = 0; i < n_; ++i) {
                const double a = (i + 0.5) * h_;
                c[static_cast<std::size_t>(i)] =
                    std::exp(-model_.log_scale_at(t, a).f - model_.potential().value(t, a)) / h_;
            }
        }
        return c;
    }

    [[nodiscard]] std::vector<double> varrho(double t) const {
        std::vector<double> r(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) r[static_cast<std::size_t>(i)] = model_.varrho(t, point(i));
        return r;
    }

    [[nodiscard]] std::vector<double> sample(const TestFunction& f) const {
        if (!f.oracle_representable(model_))
            throw OracleUnavailable("test function " + f.id() + " is not zonal; the sphere oracle is 1-D");
        std::vector<double> v(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) v[static_cast<std::size_t>(i)] = f.profile(nodes_[static_cast<std::size_t>(i)], model_.is_sphere()).first;
        return v;
    }

    /// Value at node index i, with periodic wrap or reflection through the poles.
    [[nodiscard]] double at(const std::vector<double>& u, int i) const {
        if (periodic()) return u[static_cast<std::size_t>(((i % n_) + n_) % n_)];
        if (i < 0) i = -1 - i;
        if (i >= n_) i = 2 * n_ - 1 - i;
        return u[static_cast<std::size_t>(i)];
    }

    /// Four-point Lagrange interpolation at a standard angle.
    [[nodiscard]] double interpolate(const std::vector<double>& u, double angle) const {
        const double offset = model_.is_sphere() ? 0.5 : 0.0;
        const double x = angle / h_ - offset;
        const int i = static_cast<int>(std::floor(x));
        const double f = x - i;
        const double um = at(u, i - 1), u0 = at(u, i), u1 = at(u, i + 1), u2 = at(u, i + 2);
        const double c1 = -um / 3.0 - 0.5 * u0 + u1 - u2 / 6.0;
        const double c2 = 0.5 * (um + u1) - u0;
        const double c3 = (u2 - um) / 6.0 + 0.5 * (u0 - u1);
        return u0 + f * (c1 + f * (c2 + f * c3));
    }

    /// Centered angular derivative at node i.
    [[nodiscard]] double derivative(const std::vector<double>& u, int i) const {
        return (at(u, i + 1) - at(u, i - 1)) / (2.0 * h_);
    }

private:
    EvolvingModel model_;
    int n_;
    double h_;
    std::vector<double> nodes_;
};

/// Grid function with a pointwise discretization-error estimate.
struct GridFunction {
    std::vector<double> values;
    std::vector<double> error;
    double t = 0.0;

    [[nodiscard]] double max_error() const {
        double m = 0.0;
        for (double e : error) m = std::max(m, e);
        return m;
    }
};

namespace detail {

/// Cyclic (or plain) tridiagonal system: sub[i] u_{i-1} + diag[i] u_i + sup[i] u_{i+1}.
/// Thomas elimination with Sherman-Morrison for the periodic corners.
class Tridiagonal {
public:
    Tridiagonal(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup, bool periodic)
        : n_(diag.size()), periodic_(periodic), sub_(std::move(sub)), diag_(std::move(diag)), sup_(std::move(sup)) {
        if (periodic_) {
            gamma_ = -diag_[0];
            corner_lo_ = sub_[0];
            corner_hi_ = sup_[n_ - 1];
            diag_[0] -= gamma_;
            diag_[n_ - 1] -= corner_lo_ * corner_hi_ / gamma_;
        }
        factor();
        if (periodic_) {
            z_.assign(n_, 0.0);
            z_[0] = gamma_;
            z_[n_ - 1] = corner_hi_;
            thomas(z_);
        }
    }

    void solve(std::vector<double>& rhs) const {
        thomas(rhs);
        if (!periodic_) return;
        const double vy = rhs[0] + corner_lo_ / gamma_ * rhs[n_ - 1];
        const double vz = z_[0] + corner_lo_ / gamma_ * z_[n_ - 1];
        const double factor = vy / (1.0 + vz);
        for (std::size_t i = 0; i < n_; ++i) rhs[i] -= factor * z_[i];
    }

private:
    void factor() {
        cprime_.resize(n_);
        denom_.resize(n_);
        denom_[0] = diag_[0];
        cprime_[0] = sup_[0] / denom_[0];
        for (std::size_t i = 1; i < n_; ++i) {
            denom_[i] = diag_[i] - sub_[i] * cprime_[i - 1];
            cprime_[i] = sup_[i] / denom_[i];
        }
    }

    void thomas(std::vector<double>& d) const {
        d[0] /= denom_[0];
        for (std::size_t i = 1; i < n_; ++i) d[i] = (d[i] - sub_[i] * d[i - 1]) / denom_[i];
        for (std::size_t i = n_ - 1; i-- > 0;) d[i] -= cprime_[i] * d[i + 1];
    }

    std::size_t n_;
    bool periodic_;
    std::vector<double> sub_, diag_, sup_;
    std::vector<double> cprime_, denom_, z_;
    double gamma_ = 0.0, corner_lo_ = 0.0, corner_hi_ = 0.0;
};

/// Coefficients of the semi-discrete operator at one time.
struct Coefficients {
    std::vector<double> w, c, rho;

    Coefficients(const Grid1D& grid, double t, bool need_rho)
        : w(grid.weights(t)), c(grid.conductance(t)), rho(need_rho ? grid.varrho(t) : std::vector<double>{}) {}
};

/// Backward marching of u' = -(L - lambda varrho) u.
/// lambda = 1 uses the conservative weighted form; other values use the
/// standard form with an explicit zeroth-order term.
class Marcher {
public:
    Marcher(const Grid1D& grid, double lambda) : grid_(grid), lambda_(lambda) {}

    /// One step from time r1 down to r0 = r1 - dt applied to all columns.
    /// theta = 1/2 is Crank-Nicolson, theta = 1 implicit Euler.
    void step(std::vector<std::vector<double>>& columns, const Coefficients& at0, const Coefficients& at1,
              double dt, double theta) const {
        const int n = grid_.size();
        const bool periodic = grid_.periodic();
        const bool conservative = lambda_ == 1.0;
        auto left = [&](const std::vector<double>& c, int i) {
            if (i > 0) return c[static_cast<std::size_t>(i - 1)];
            return periodic ? c[static_cast<std::size_t>(n - 1)] : 0.0;
        };

        std::vector<double> sub(static_cast<std::size_t>(n)), diag(static_cast<std::size_t>(n)),
            sup(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            const double cr = at0.c[k], cl = left(at0.c, i);
            if (conservative) {
                diag[k] = at0.w[k] + theta * dt * (cr + cl);
                sub[k] = -theta * dt * cl;
                sup[k] = -theta * dt * cr;
            } else {
                const double inv = 1.0 / at0.w[k];
                diag[k] = 1.0 + theta * dt * ((cr + cl) * inv + (lambda_ != 0.0 ? lambda_ * at0.rho[k] : 0.0));
                sub[k] = -theta * dt * cl * inv;
                sup[k] = -theta * dt * cr * inv;
            }
        }
        const Tridiagonal lhs(std::move(sub), std::move(diag), std::move(sup), periodic);

        std::vector<double> rhs(static_cast<std::size_t>(n));
        for (auto& u : columns) {
            for (int i = 0; i < n; ++i) {
                const auto k = static_cast<std::size_t>(i);
                const double ul = grid_.at(u, i - 1), ur = grid_.at(u, i + 1), ui = u[k];
                const double cr = at1.c[k], cl = left(at1.c, i);
                const double flux = cr * (ur - ui) - cl * (ui - ul);
                if (conservative) {
                    rhs[k] = at1.w[k] * ui + (1.0 - theta) * dt * flux;
                } else {
                    const double lu = flux / at1.w[k] - (lambda_ != 0.0 ? lambda_ * at1.rho[k] * ui : 0.0);
                    rhs[k] = ui + (1.0 - theta) * dt * lu;
                }
            }
            lhs.solve(rhs);
            u.swap(rhs);
        }
    }

    [[nodiscard]] bool needs_rho() const { return lambda_ != 0.0 && lambda_ != 1.0; }

private:
    const Grid1D& grid_;
    double lambda_;
};

/// Marches columns from t down to s with uniform steps of at most max_step.
/// `rannacher` replaces the first two steps by four implicit Euler half steps.
inline void march(const Grid1D& grid, double s, double t, double lambda, double max_step,
                  std::vector<std::vector<double>>& columns, bool rannacher = false) {
    if (t <= s) return;
    const Marcher marcher(grid, lambda);
    const auto steps = static_cast<int>(std::ceil((t - s) / max_step - 1e-9));
    const double dt = (t - s) / steps;
    const bool rho = marcher.needs_rho();
    Coefficients upper(grid, t, rho);
    int k = 0;
    if (rannacher && steps >= 2) {
        for (int j = 1; j <= 4; ++j) {
            const double r0 = t - 0.5 * dt * j;
            Coefficients lower(grid, r0, rho);
            marcher.step(columns, lower, upper, 0.5 * dt, 1.0);
            upper = std::move(lower);
        }
        k = 2;
    }
    for (; k < steps; ++k) {
        const double r0 = (k + 1 == steps) ? s : t - dt * (k + 1);
        Coefficients lower(grid, r0, rho);
        marcher.step(columns, lower, upper, dt, 0.5);
        upper = std::move(lower);
    }
}

inline std::vector<double> march_one(const Grid1D& grid, double s, double t, double lambda, double max_step,
                                     std::vector<double> f) {
    std::vector<std::vector<double>> cols{std::move(f)};
    march(grid, s, t, lambda, max_step, cols);
    return std::move(cols[0]);
}

/// Restriction of a fine-grid function to a grid with half the nodes.
inline std::vector<double> coarse_sample(const Grid1D& fine, const std::vector<double>& f) {
    std::vector<double> out(static_cast<std::size_t>(fine.size() / 2));
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (fine.periodic()) {
            out[i] = f[2 * i];
        } else {
            out[i] = 0.5 * (f[2 * i] + f[2 * i + 1]);
        }
    }
    return out;
}

}  // namespace detail

/// Core solver on grid values f (sampled at time t on the grid of `opts.nodes`).
/// The returned values are time-Richardson extrapolated when enabled; the error
/// vector sums the time and space estimates.
inline GridFunction solve_values(const EvolvingModel& model, double s, double t, const std::vector<double>& f,
                                 double lambda, const OracleOptions& opts = {}) {
    model.check_time(s);
    model.check_time(t);
    if (t < s) throw InvalidArgument("oracle requires s <= t");
    const Grid1D grid(model, opts.nodes);
    if (static_cast<int>(f.size()) != grid.size()) throw InvalidArgument("grid function has the wrong size");

    GridFunction out;
    out.t = s;
    const std::size_t n = f.size();
    const std::vector<double> coarse_t = detail::march_one(grid, s, t, lambda, opts.max_step, f);
    std::vector<double> time_err(n, 0.0), space_err(n, 0.0);
    out.values = coarse_t;
    if (opts.time_richardson && t > s) {
        const std::vector<double> fine_t = detail::march_one(grid, s, t, lambda, 0.5 * opts.max_step, f);
        for (std::size_t i = 0; i < n; ++i) {
            out.values[i] = (4.0 * fine_t[i] - coarse_t[i]) / 3.0;
            time_err[i] = std::abs(fine_t[i] - coarse_t[i]) / 3.0;
        }
    }
    if (opts.spatial_estimate && t > s && grid.size() >= 32) {
        // Half-resolution solve with the same step, compared at the coarse nodes
        // and spread to the neighbouring fine nodes.
        const Grid1D half(model, grid.size() / 2);
        const std::vector<double> u_half =
            detail::march_one(half, s, t, lambda, opts.max_step, detail::coarse_sample(grid, f));
        const int nn = grid.size();
        for (int j = 0; j < half.size(); ++j) {
            const double fine_val = grid.interpolate(coarse_t, half.nodes()[static_cast<std::size_t>(j)]);
            const double diff = std::abs(fine_val - u_half[static_cast<std::size_t>(j)]) / 3.0;
            for (int k = 2 * j - 1; k <= 2 * j + 2; ++k) {
                if (!grid.periodic() && (k < 0 || k >= nn)) continue;
                const auto idx = static_cast<std::size_t>(((k % nn) + nn) % nn);
                space_err[idx] = std::max(space_err[idx], diff);
            }
        }
    }
    out.error.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.error[i] = time_err[i] + space_err[i];
    return out;
}

/// P_{s,t} f on the grid.
inline GridFunction solve_backward_heat(const EvolvingModel& model, double s, double t, const TestFunction& f,
                                        const OracleOptions& opts = {}) {
    return solve_values(model, s, t, Grid1D(model, opts.nodes).sample(f), 0.0, opts);
}

/// P^rho_{s,t} f on the grid.
inline GridFunction solve_conjugate(const EvolvingModel& model, double s, double t, const TestFunction& f,
                                    const OracleOptions& opts = {}) {
    return solve_values(model, s, t, Grid1D(model, opts.nodes).sample(f), 1.0, opts);
}

/// |grad^s P^rho_{s,t} f|_s on the grid (centered differences).
inline GridFunction oracle_gradient(const EvolvingModel& model, double s, double t, const TestFunction& f,
                                    const OracleOptions& opts = {}) {
    const Grid1D grid(model, opts.nodes);
    const GridFunction u = solve_conjugate(model, s, t, f, opts);
    GridFunction out;
    out.t = s;
    out.values.resize(u.values.size());
    out.error.resize(u.values.size());
    for (int i = 0; i < grid.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double scale = model.is_sphere() ? 1.0 / std::sqrt(1.0 - 2.0 * s)
                                               : std::exp(-model.log_scale_at(s, grid.nodes()[k]).f);
        out.values[k] = std::abs(grid.derivative(u.values, i)) * scale;
        // Value error propagated through the difference quotient, plus its truncation term.
        const double err_val = std::max(grid.at(u.error, i - 1), grid.at(u.error, i + 1)) / grid.spacing();
        const double third = (grid.at(u.values, i + 2) - 2.0 * grid.at(u.values, i + 1) +
                              2.0 * grid.at(u.values, i - 1) - grid.at(u.values, i - 2)) /
                             (2.0 * std::pow(grid.spacing(), 3));
        out.error[k] = scale * (err_val + std::abs(third) * grid.spacing() * grid.spacing() / 6.0);
    }
    return out;
}

/// Solutions at several times r in [s, t] from one backward march.
inline std::vector<GridFunction> solve_snapshots(const EvolvingModel& model, double s, double t,
                                                 const std::vector<double>& f, double lambda,
                                                 std::vector<double> times, const OracleOptions& opts = {}) {
    std::vector<std::size_t> order(times.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] > times[b]; });
    std::vector<GridFunction> out(times.size());
    std::vector<double> current = f;
    double now = t;
    for (std::size_t idx : order) {
        const double r = times[idx];
        if (r < s || r > t) throw InvalidArgument("snapshot time outside [s, t]");
        GridFunction g = solve_values(model, r, now, current, lambda, opts);
        current = g.values;
        out[idx] = g;
        now = r;
    }
    // Accumulate segment errors so each snapshot carries the total from t.
    std::vector<double> running(f.size(), 0.0);
    for (std::size_t idx : order) {
        for (std::size_t i = 0; i < running.size(); ++i) {
            running[i] += out[idx].error[i];
            out[idx].error[i] = running[i];
        }
    }
    return out;
}

// ---- kernels and operator norms ---------------------------------------------

/// entries(i, j) ~ p(s, x_i; t, y_j), a density with respect to mu_t.
/// On the sphere the reduced kernel is the azimuthal average over y; the row
/// nearest a pole equals the full kernel there.
struct KernelMatrix {
    std::vector<double> nodes;
    std::vector<double> weights_s;  // mu_s weights of the rows
    std::vector<double> weights_t;  // mu_t weights of the columns
    std::vector<double> entries;    // row-major n x n
    int n = 0;
    double s = 0.0, t = 0.0;
    bool conjugate = false;

    [[nodiscard]] double operator()(int i, int j) const {
        return entries[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
    }
};

struct KernelOptions {
    int nodes = 256;
    int max_nodes = 512;
    double max_step = 2.5e-4;
    /// Target number of grid spacings per kernel width sqrt(2 (t - s)).
    double resolution = 12.0;
};

inline KernelMatrix kernel_matrix(const EvolvingModel& model, double s, double t, bool conjugate,
                                  const KernelOptions& opts = {}) {
    model.check_time(s);
    model.check_time(t);
    if (!(t > s)) throw InvalidArgument("kernel_matrix requires s < t");
    const double span = model.is_sphere() ? std::numbers::pi : kTwoPi;
    int n = opts.nodes;
    while (n < opts.max_nodes && span / n * opts.resolution > std::sqrt(2.0 * (t - s))) n *= 2;
    const Grid1D grid(model, n);
    KernelMatrix k;
    k.n = n;
    k.s = s;
    k.t = t;
    k.conjugate = conjugate;
    k.nodes = grid.nodes();
    k.weights_s = grid.weights(s);
    k.weights_t = grid.weights(t);
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (int j = 0; j < n; ++j) cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] = 1.0 / k.weights_t[static_cast<std::size_t>(j)];
    const double step = std::min(opts.max_step, (t - s) / 8.0);
    detail::march(grid, s, t, conjugate ? 1.0 : 0.0, step, cols, true);
    k.entries.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            k.entries[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] =
                cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    return k;
}

struct OpNormResult {
    double value = 0.0;
    bool lower_bound = true;  // discretized power iteration gives a lower estimate
    bool converged = false;
    int iterations = 0;
};

/// ||T||_{L^p(mu_t) -> L^q(mu_s)} for (T f)_i = sum_j K_ij f_j w_j(t), by the
/// nonlinear power iteration f <- (T^*((T f)^{q-1}))^{1/(p-1)} over f >= 0.
inline OpNormResult opnorm_p_to_q(const KernelMatrix& kernel, double p, double q, int starts = 5,
                                  int max_iter = 500, double tol = 1e-12, std::uint64_t seed = 17) {
    if (!(p > 1.0) || !(q >= p)) throw InvalidArgument("opnorm requires 1 < p <= q");
    const int n = kernel.n;
    const auto N = static_cast<std::size_t>(n);
    auto norm = [&](const std::vector<double>& v, const std::vector<double>& w, double r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) acc += w[i] * std::pow(std::abs(v[i]), r);
        return std::pow(acc, 1.0 / r);
    };
    auto apply = [&](const std::vector<double>& f) {
        std::vector<double> out(N, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < N; ++j) acc += kernel.entries[i * N + j] * f[j] * kernel.weights_t[j];
            out[i] = acc;
        }
        return out;
    };
    auto adjoint = [&](const std::vector<double>& g) {
        std::vector<double> out(N, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            const double gi = g[i] * kernel.weights_s[i];
            for (std::size_t j = 0; j < N; ++j) out[j] += kernel.entries[i * N + j] * gi;
        }
        return out;
    };

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    OpNormResult best;
    for (int start = 0; start < starts; ++start) {
        std::vector<double> f(N, 1.0);
        if (start == 1) {
            for (std::size_t j = 0; j < N; ++j) f[j] = (j == 0) ? 1.0 : 1e-3;
        } else if (start == 2) {
            for (std::size_t j = 0; j < N; ++j) f[j] = (j == N / 2) ? 1.0 : 1e-3;
        } else if (start > 2) {
            for (double& v : f) v = unif(rng);
        }
        const double nf = norm(f, kernel.weights_t, p);
        for (double& v : f) v /= nf;
        double value = norm(apply(f), kernel.weights_s, q);
        bool converged = false;
        int it = 0;
        for (; it < max_iter; ++it) {
            std::vector<double> tf = apply(f);
            for (double& v : tf) v = std::pow(std::max(v, 0.0), q - 1.0);
            std::vector<double> g = adjoint(tf);
            for (double& v : g) v = std::pow(std::max(v, 0.0), 1.0 / (p - 1.0));
            const double ng = norm(g, kernel.weights_t, p);
            if (!(ng > 0.0)) break;
            for (double& v : g) v /= ng;
            const double next = norm(apply(g), kernel.weights_s, q);
            f.swap(g);
            if (std::abs(next - value) <= tol * std::max(1.0, std::abs(value))) {
                value = std::max(value, next);
                converged = true;
                break;
            }
            value = std::max(value, next);
        }
        if (value > best.value) {
            best.value = value;
            best.converged = converged;
            best.iterations = it;
        }
    }
    return best;
}

/// ||T||_{L^1(mu_t) -> L^1(mu_s)} = max_j sum_i K_ij w_i(s) for a nonnegative kernel.
inline double opnorm_one_to_one(const KernelMatrix& kernel) {
    const auto N = static_cast<std::size_t>(kernel.n);
    double best = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) acc += kernel.entries[i * N + j] * kernel.weights_s[i];
        best = std::max(best, acc);
    }
    return best;
}

}  // namespace evoheat
