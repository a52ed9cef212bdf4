#pragma once

// Scalar curvature profiles K, K1, K2, kappa and the envelopes of varrho.
//
// K1(t) = K(t) lower-bounds the smallest g_t-eigenvalue of
// Ric - 1/2 d_t g + Hess phi, K2(t) the one of Ric + 1/2 d_t g + Hess phi,
// kappa(t) upper-bounds |d varrho_t|, and sup_rho_plus / sup_rho_minus are
// sup of the positive / negative parts of varrho_t.

#include "evoheat/errors.hpp"
#include "evoheat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

namespace evoheat {

enum class Provenance { ClosedForm, GridExtremized };

inline std::string to_string(Provenance p) { return p == Provenance::ClosedForm ? "ClosedForm" : "GridExtremized"; }

struct ProfileOptions {
    int angle_nodes = 2048;
    int time_nodes = 512;
};

class BoundProfile {
public:
    using Fn = std::function<double(double)>;

    BoundProfile() = default;

    /// Profile from explicit callables; used for synthetic constants and tests.
    BoundProfile(Fn k1, Fn k2, Fn kappa, Fn rho_max, Fn rho_min, double horizon,
                 Provenance provenance = Provenance::ClosedForm, bool kappa_zero = false, bool rho_zero = false)
        : k1_(std::move(k1)),
          k2_(std::move(k2)),
          kappa_(std::move(kappa)),
          rho_max_(std::move(rho_max)),
          rho_min_(std::move(rho_min)),
          horizon_(horizon),
          provenance_(provenance),
          kappa_zero_(kappa_zero),
          rho_zero_(rho_zero) {}

    /// Constant profile K1 = k, K2 = k2, kappa = c, varrho in [rho_min, rho_max].
    static BoundProfile constant(double k, double k2, double kappa, double rho_min, double rho_max,
                                 double horizon = std::numeric_limits<double>::infinity()) {
        return BoundProfile([k](double) { return k; }, [k2](double) { return k2; }, [kappa](double) { return kappa; },
                            [rho_max](double) { return rho_max; }, [rho_min](double) { return rho_min; }, horizon,
                            Provenance::ClosedForm, kappa == 0.0, rho_min == 0.0 && rho_max == 0.0);
    }

    [[nodiscard]] double K(double t) const { return k1_(checked(t)); }
    [[nodiscard]] double K1(double t) const { return k1_(checked(t)); }
    [[nodiscard]] double K2(double t) const { return k2_(checked(t)); }
    [[nodiscard]] double kappa(double t) const { return kappa_(checked(t)); }
    [[nodiscard]] double sup_rho(double t) const { return rho_max_(checked(t)); }
    [[nodiscard]] double inf_rho(double t) const { return rho_min_(checked(t)); }
    [[nodiscard]] double sup_rho_plus(double t) const { return std::max(0.0, sup_rho(t)); }
    [[nodiscard]] double sup_rho_minus(double t) const { return std::max(0.0, -inf_rho(t)); }

    [[nodiscard]] double horizon() const { return horizon_; }
    [[nodiscard]] Provenance provenance() const { return provenance_; }
    /// kappa vanishes identically (known structurally, not numerically).
    [[nodiscard]] bool kappa_is_zero() const { return kappa_zero_; }
    /// varrho vanishes identically.
    [[nodiscard]] bool rho_is_zero() const { return rho_zero_; }

    /// Break points of tabulated profiles (empty for smooth ones); integrals
    /// in time should not straddle them.
    [[nodiscard]] const std::vector<double>& time_knots() const { return knots_; }
    void set_time_knots(std::vector<double> knots) { knots_ = std::move(knots); }

private:
    double checked(double t) const {
        if (!(t >= 0.0) || t > horizon_) throw TimeOutOfRange("profile time outside [0, T]");
        return t;
    }

    Fn k1_, k2_, kappa_, rho_max_, rho_min_;
    double horizon_ = 0.0;
    Provenance provenance_ = Provenance::ClosedForm;
    bool kappa_zero_ = false;
    bool rho_zero_ = false;
    std::vector<double> knots_;
};

namespace detail {

/// Pointwise circle quantities from psi (g = e^{2 psi}) and phi.
struct CirclePointData {
    double k1, k2, kappa, rho;
};

inline CirclePointData circle_point(const EvolvingModel& model, double t, double theta) {
    const TrigEval psi = model.log_scale_at(t, theta);
    const TrigEval phi = model.potential().eval(t, theta);
    const double hess = std::exp(-2.0 * psi.f) * (phi.f_xx - psi.f_x * phi.f_x);
    return {-psi.f_t + hess, psi.f_t + hess, std::abs(phi.f_tx - psi.f_tx) * std::exp(-psi.f), phi.f_t - psi.f_t};
}

/// Minimum of a periodic function: grid scan, then golden-section refinement
/// around the best node.
template <class F>
double periodic_min(F&& f, int nodes) {
    const double h = kTwoPi / nodes;
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < nodes; ++i) {
        const double v = f(h * i);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    double a = h * (best - 1), b = h * (best + 1);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - ratio * (b - a), d = a + ratio * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 80 && b - a > 1e-12; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    return std::min({best_val, fc, fd});
}

/// Piecewise-linear table with per-interval slack: value(t) is shifted by the
/// midpoint interpolation defect so lower (upper) envelopes stay conservative.
class EnvelopeTable {
public:
    EnvelopeTable(std::vector<double> times, std::vector<double> values, std::vector<double> slack, int direction)
        : times_(std::move(times)), values_(std::move(values)), slack_(std::move(slack)), direction_(direction) {}

    double operator()(double t) const {
        const double lo = times_.front(), hi = times_.back();
        const double u = std::clamp((t - lo) / (hi - lo), 0.0, 1.0) * static_cast<double>(times_.size() - 1);
        auto i = static_cast<std::size_t>(std::floor(u));
        if (i >= times_.size() - 1) i = times_.size() - 2;
        const double w = u - static_cast<double>(i);
        return (1.0 - w) * values_[i] + w * values_[i + 1] + direction_ * slack_[i];
    }

private:
    std::vector<double> times_, values_, slack_;
    int direction_;
};

}  // namespace detail

/// Closed form where the model admits one, grid extremization otherwise.
inline BoundProfile bound_profile(const EvolvingModel& model, const ProfileOptions& opts = {}) {
    const double T = model.horizon();
    const TrigSeries& potential = model.potential();

    if (model.is_sphere()) {
        auto rho = [potential](double t) { return potential.eval(t, 0.0).f_t + 2.0 / (1.0 - 2.0 * t); };
        return BoundProfile([](double t) { return 2.0 / (1.0 - 2.0 * t); }, [](double) { return 0.0; },
                            [](double) { return 0.0; }, rho, rho, T, Provenance::ClosedForm, true, false);
    }

    if (model.kind() == ModelKind::ScaledCircle && potential.is_spatially_constant()) {
        const Polynomial c = model.scale();
        auto k1 = [c](double t) { return -c.derivative(t) / c(t); };
        auto k2 = [c](double t) { return c.derivative(t) / c(t); };
        auto rho = [c, potential](double t) { return potential.eval(t, 0.0).f_t - c.derivative(t) / c(t); };
        const bool rho_zero = c.is_constant() && potential.is_static();
        return BoundProfile(k1, k2, [](double) { return 0.0; }, rho, rho, T, Provenance::ClosedForm, true, rho_zero);
    }

    const int nt = opts.time_nodes;
    std::vector<double> times(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i) times[static_cast<std::size_t>(i)] = T * i / (nt - 1);

    // Per time node: min k1, min k2, -max kappa, -max rho, min rho.
    auto extremize = [&](double t) {
        std::array<double, 5> out{};
        out[0] = detail::periodic_min([&](double th) { return detail::circle_point(model, t, th).k1; }, opts.angle_nodes);
        out[1] = detail::periodic_min([&](double th) { return detail::circle_point(model, t, th).k2; }, opts.angle_nodes);
        out[2] = detail::periodic_min([&](double th) { return -detail::circle_point(model, t, th).kappa; },
                                      opts.angle_nodes);
        out[3] = detail::periodic_min([&](double th) { return -detail::circle_point(model, t, th).rho; },
                                      opts.angle_nodes);
        out[4] = detail::periodic_min([&](double th) { return detail::circle_point(model, t, th).rho; },
                                      opts.angle_nodes);
        return out;
    };

    std::array<std::vector<double>, 5> values;
    std::array<std::vector<double>, 5> slack;
    for (auto& v : values) v.resize(times.size());
    for (auto& v : slack) v.assign(times.size() - 1, 0.0);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const auto e = extremize(times[i]);
        for (int q = 0; q < 5; ++q) values[static_cast<std::size_t>(q)][i] = e[static_cast<std::size_t>(q)];
    }
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        const auto e = extremize(0.5 * (times[i] + times[i + 1]));
        for (std::size_t q = 0; q < 5; ++q) {
            const double interp = 0.5 * (values[q][i] + values[q][i + 1]);
            slack[q][i] = 2.0 * std::max(0.0, interp - e[q]);
        }
    }

    auto lower = [&](std::size_t q) { return detail::EnvelopeTable(times, values[q], slack[q], -1); };
    auto upper = [&](std::size_t q) {
        std::vector<double> neg(values[q].size());
        std::transform(values[q].begin(), values[q].end(), neg.begin(), [](double v) { return -v; });
        return detail::EnvelopeTable(times, neg, slack[q], +1);
    };

    auto all_zero = [&](std::size_t q) {
        return std::all_of(values[q].begin(), values[q].end(), [](double v) { return v == 0.0; });
    };
    BoundProfile out(lower(0), lower(1), upper(2), upper(3), lower(4), T, Provenance::GridExtremized, all_zero(2),
                     all_zero(3) && all_zero(4));
    out.set_time_knots(times);
    return out;
}

}  // namespace evoheat
