#pragma once

// Explicit constants and right-hand sides of the inequalities, computed from a
// BoundProfile. Every nested integral goes through a cumulative table of
// I(r) = int_lo^r K(u) du so the iterated integrals reduce to single ones.

#include "evoheat/errors.hpp"
#include "evoheat/geometry.hpp"
#include "evoheat/profile.hpp"
#include "evoheat/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace evoheat {

/// Which curvature lower bound enters a constant: K (= K1) bounds
/// Ric - h + Hess phi, K2 bounds Ric + h + Hess phi.
enum class CurvatureBound { K, K1, K2 };

struct ConstantsOptions {
    std::size_t panels = 64;
    double tol = 1e-12;
};

namespace detail {

inline double curvature(const BoundProfile& profile, CurvatureBound which, double u) {
    return which == CurvatureBound::K2 ? profile.K2(u) : profile.K1(u);
}

/// Uniform panels on [lo, hi] merged with the profile's break points.
inline std::vector<double> panel_knots(const BoundProfile& profile, double lo, double hi, const ConstantsOptions& opts) {
    std::vector<double> knots;
    for (std::size_t i = 0; i <= opts.panels; ++i)
        knots.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(opts.panels));
    for (double k : profile.time_knots())
        if (k > lo && k < hi) knots.push_back(k);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    knots.front() = lo;
    knots.back() = hi;
    return knots;
}

/// int_a^b f over pieces that do not straddle profile break points.
template <class F>
double integrate_time(const BoundProfile& profile, F&& f, double a, double b, const ConstantsOptions& opts) {
    if (profile.time_knots().empty()) return quad::integrate(f, a, b, opts.tol);
    double acc = 0.0, lo = a;
    for (double k : profile.time_knots()) {
        if (k <= lo) continue;
        if (k >= b) break;
        acc += quad::integrate(f, lo, k, opts.tol);
        lo = k;
    }
    return acc + quad::integrate(f, lo, b, opts.tol);
}

/// Cumulative I(r) = int_lo^r K(u) du on [lo, hi].
inline quad::CumulativeIntegral curvature_integral(const BoundProfile& profile, CurvatureBound which, double lo,
                                                   double hi, const ConstantsOptions& opts) {
    return quad::CumulativeIntegral([&profile, which](double u) { return curvature(profile, which, u); },
                                    panel_knots(profile, lo, hi, opts));
}

inline void check_interval(const BoundProfile& profile, double s, double t) {
    if (!(s >= 0.0) || !(t >= s)) throw InvalidArgument("constants need 0 <= s <= t");
    if (!(t < profile.horizon())) throw TimeOutOfRange("t must lie below the horizon");
}

}  // namespace detail

/// int_s^t exp(2 int_s^r K(u) du) dr
inline double alpha(const BoundProfile& profile, double s, double t, CurvatureBound which = CurvatureBound::K,
                    const ConstantsOptions& opts = {}) {
    detail::check_interval(profile, s, t);
    if (t == s) return 0.0;
    const auto I = detail::curvature_integral(profile, which, s, t, opts);
    return detail::integrate_time(profile, [&](double r) { return std::exp(2.0 * I.at(r)); }, s, t, opts);
}

/// int_s^t int_s^v kappa(r) exp(2 int_s^v K - int_s^r K) dr dv
inline double eta(const BoundProfile& profile, double s, double t, CurvatureBound which = CurvatureBound::K,
                  const ConstantsOptions& opts = {}) {
    detail::check_interval(profile, s, t);
    if (t == s || profile.kappa_is_zero()) return 0.0;
    const auto I = detail::curvature_integral(profile, which, s, t, opts);
    const quad::CumulativeIntegral J([&](double r) { return profile.kappa(r) * std::exp(-I.at(r)); }, I.knots());
    return detail::integrate_time(profile, [&](double v) { return std::exp(2.0 * I.at(v)) * J.at(v); }, s, t, opts);
}

inline double sup_rho_minus_integral(const BoundProfile& profile, double s, double t, const ConstantsOptions& opts = {}) {
    detail::check_interval(profile, s, t);
    if (t == s) return 0.0;
    return detail::integrate_time(profile, [&](double r) { return profile.sup_rho_minus(r); }, s, t, opts);
}

inline double sup_rho_plus_integral(const BoundProfile& profile, double s, double t, const ConstantsOptions& opts = {}) {
    detail::check_interval(profile, s, t);
    if (t == s) return 0.0;
    return detail::integrate_time(profile, [&](double r) { return profile.sup_rho_plus(r); }, s, t, opts);
}

// ---- Harnack ----------------------------------------------------------------

struct HarnackConstants {
    double alpha = 0.0;
    double eta = 0.0;
    double sup_rho_minus_int = 0.0;
    double s = 0.0, t = 0.0, p = 0.0;
};

inline HarnackConstants harnack_constants(const BoundProfile& profile, double s, double t, double p,
                                          const ConstantsOptions& opts = {}) {
    if (!(p > 1.0)) throw InvalidArgument("Harnack exponent p must exceed 1");
    HarnackConstants c;
    c.alpha = alpha(profile, s, t, CurvatureBound::K, opts);
    c.eta = eta(profile, s, t, CurvatureBound::K, opts);
    c.sup_rho_minus_int = sup_rho_minus_integral(profile, s, t, opts);
    c.s = s;
    c.t = t;
    c.p = p;
    return c;
}

namespace detail {

/// p rho^2 / (4 (p-1) alpha), with the x = y case kept finite when alpha = 0.
inline double wang_exponent(double p, double dist, double a) {
    if (dist == 0.0) return 0.0;
    return p * dist * dist / (4.0 * (p - 1.0) * a);
}

inline double eta_term(double factor, double e, double dist, double a) {
    if (dist == 0.0 || e == 0.0) return 0.0;
    return factor * e * dist / a;
}

}  // namespace detail

/// Exponent of inequality (i).
inline double harnack_exponent_i(const HarnackConstants& c, double dist) {
    return (c.p - 1.0) * c.sup_rho_minus_int + detail::wang_exponent(c.p, dist, c.alpha) +
           detail::eta_term(c.p, c.eta, dist, c.alpha);
}

/// Exponent of inequality (ii) without the Feynman-Kac moment.
inline double harnack_exponent_ii(const HarnackConstants& c, double dist) {
    return detail::wang_exponent(c.p, dist, c.alpha) + detail::eta_term(2.0 * c.p, c.eta, dist, c.alpha);
}

/// (P^rho f^p)(y) exp((p-1) int sup rho^- + p rho^2/(4(p-1) alpha) + p eta rho/alpha)
inline double harnack_rhs_i(const EvolvingModel& model, const BoundProfile& profile, double s, double t,
                            const Point& x, const Point& y, double p, double pf_p_at_y,
                            const ConstantsOptions& opts = {}) {
    const auto c = harnack_constants(profile, s, t, p, opts);
    return pf_p_at_y * std::exp(harnack_exponent_i(c, model.distance(s, x, y)));
}

/// (P^rho f^p)(y) E^y[exp(-(p-1) int rho)] exp(p rho^2/(4(p-1) alpha) + 2 p eta rho/alpha)
inline double harnack_rhs_ii(const EvolvingModel& model, const BoundProfile& profile, double s, double t,
                             const Point& x, const Point& y, double p, double pf_p_at_y, double fk_moment,
                             const ConstantsOptions& opts = {}) {
    const auto c = harnack_constants(profile, s, t, p, opts);
    return pf_p_at_y * fk_moment * std::exp(harnack_exponent_ii(c, model.distance(s, x, y)));
}

/// P f^p(y) exp(p rho^2/(4(p-1) alpha)) for the plain semigroup.
inline double plain_harnack_rhs(const EvolvingModel& model, const BoundProfile& profile, double s, double t,
                                const Point& x, const Point& y, double p, double pf_p_at_y,
                                const ConstantsOptions& opts = {}) {
    if (!(p > 1.0)) throw InvalidArgument("Harnack exponent p must exceed 1");
    const double a = alpha(profile, s, t, CurvatureBound::K, opts);
    return pf_p_at_y * std::exp(detail::wang_exponent(p, model.distance(s, x, y), a));
}

// ---- gradient and semigroup log-Sobolev ----------------------------------------

struct GradientConstants {
    double decay = 1.0;      // exp(-int_s^t K)
    double potential = 0.0;  // int_s^t kappa(r) exp(-int_s^r K) dr
};

inline GradientConstants gradient_constants(const BoundProfile& profile, double s, double t,
                                            const ConstantsOptions& opts = {}) {
    detail::check_interval(profile, s, t);
    GradientConstants c;
    if (t == s) return c;
    const auto I = detail::curvature_integral(profile, CurvatureBound::K, s, t, opts);
    c.decay = std::exp(-I.at(t));
    if (!profile.kappa_is_zero())
        c.potential = detail::integrate_time(
            profile, [&](double r) { return profile.kappa(r) * std::exp(-I.at(r)); }, s, t, opts);
    return c;
}

/// exp(-int K) P^rho|grad f| + P^rho f int kappa exp(-int K)
inline double gradient_bound_rhs(const BoundProfile& profile, double s, double t, double p_conj_grad_f,
                                 double p_conj_f, const ConstantsOptions& opts = {}) {
    const auto c = gradient_constants(profile, s, t, opts);
    return c.decay * p_conj_grad_f + p_conj_f * c.potential;
}

struct SemigroupLogSobConstants {
    double gradient_factor = 0.0;  // 4 int_s^t exp(-2 int_r^t K) dr
    double additive = 0.0;         // int_s^t (2 (int_r^t kappa e^{-int_r^u K})^2 + sup rho^+_r) dr
};

inline SemigroupLogSobConstants semigroup_logsob_constants(const BoundProfile& profile, double s, double t,
                                                           const ConstantsOptions& opts = {}) {
    detail::check_interval(profile, s, t);
    SemigroupLogSobConstants c;
    if (t == s) return c;
    const auto I = detail::curvature_integral(profile, CurvatureBound::K, s, t, opts);
    const double It = I.at(t);
    c.gradient_factor =
        4.0 * detail::integrate_time(profile, [&](double r) { return std::exp(-2.0 * (It - I.at(r))); }, s, t, opts);
    if (profile.kappa_is_zero()) {
        c.additive = sup_rho_plus_integral(profile, s, t, opts);
    } else {
        // int_r^t kappa(u) e^{-(I(u) - I(r))} du = e^{I(r)} (J(t) - J(r)), J' = kappa e^{-I}.
        const quad::CumulativeIntegral J([&](double u) { return profile.kappa(u) * std::exp(-I.at(u)); },
                                         I.knots());
        const double Jt = J.at(t);
        c.additive = detail::integrate_time(
            profile,
            [&](double r) {
                const double inner = std::exp(I.at(r)) * (Jt - J.at(r));
                return 2.0 * inner * inner + profile.sup_rho_plus(r);
            },
            s, t, opts);
    }
    return c;
}

/// 4 A P^rho|grad f|^2 + P^rho f^2 log P^rho f^2 + B P^rho f^2
inline double logsob_semigroup_rhs(const BoundProfile& profile, double s, double t, double p_conj_grad2,
                                   double p_conj_f2, const ConstantsOptions& opts = {}) {
    const auto c = semigroup_logsob_constants(profile, s, t, opts);
    const double entropy = p_conj_f2 > 0.0 ? p_conj_f2 * std::log(p_conj_f2) : 0.0;
    return c.gradient_factor * p_conj_grad2 + entropy + c.additive * p_conj_f2;
}

// ---- heat kernel bound ------------------------------------------------------

enum class KernelBoundVariant { General, ZeroVarrho, ZeroPotential };

struct KernelBoundConstants {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double eta2 = 0.0;
    double sup_rho_plus_int = 0.0;
    double exponent = 0.0;  // log of the numerator
};

/// Constants of the kernel bound at time t. ZeroVarrho needs varrho = 0 and
/// drops the varrho^+ and eta_2 terms; ZeroPotential needs phi = 0, where
/// varrho equals the trace of h.
inline KernelBoundConstants kernel_bound_constants(const EvolvingModel& model, const BoundProfile& profile, double t,
                                                   KernelBoundVariant variant = KernelBoundVariant::General,
                                                   const ConstantsOptions& opts = {}) {
    if (!(t > 0.0)) throw InvalidArgument("kernel bound needs t > 0");
    if (variant == KernelBoundVariant::ZeroVarrho && !profile.rho_is_zero())
        throw HypothesisViolation("this specialization requires varrho = 0");
    if (variant == KernelBoundVariant::ZeroPotential && !model.potential_is_zero())
        throw HypothesisViolation("this specialization requires a zero potential");
    if (!std::isfinite(profile.kappa(t)) || !std::isfinite(profile.sup_rho_plus(t)))
        throw HypothesisViolation("kernel bound needs finite kappa and sup varrho^+");
    KernelBoundConstants c;
    c.alpha1 = alpha(profile, 0.0, 0.5 * t, CurvatureBound::K1, opts);
    c.alpha2 = alpha(profile, 0.5 * t, t, CurvatureBound::K2, opts);
    if (variant == KernelBoundVariant::ZeroVarrho) {
        c.exponent = t / (4.0 * c.alpha1) + t / (4.0 * c.alpha2);
        return c;
    }
    c.eta2 = eta(profile, 0.5 * t, t, CurvatureBound::K2, opts);
    c.sup_rho_plus_int = sup_rho_plus_integral(profile, 0.0, t, opts);
    c.exponent = 0.5 * c.sup_rho_plus_int + t / (4.0 * c.alpha1) +
                 (t + 4.0 * c.eta2 * std::sqrt(t)) / (4.0 * c.alpha2);
    return c;
}

inline double kernel_bound_from(const KernelBoundConstants& c, double ball_x, double ball_y) {
    return std::exp(c.exponent) / std::sqrt(ball_x * ball_y);
}

/// Upper bound for p(0, x; t, y) with balls of radius sqrt(t).
inline double kernel_bound_rhs(const EvolvingModel& model, const BoundProfile& profile, double t, const Point& x,
                               const Point& y, KernelBoundVariant variant = KernelBoundVariant::General,
                               const ConstantsOptions& opts = {}) {
    const auto c = kernel_bound_constants(model, profile, t, variant, opts);
    return kernel_bound_from(c, model.ball_volume(0.0, x, std::sqrt(t)), model.ball_volume(t, y, std::sqrt(t)));
}

// ---- super log-Sobolev ------------------------------------------------------

enum class BetaVariant { Proof, Statement };

struct LogSobConstants {
    double gamma = 0.0;      // gamma(gamma_inv, t)
    double gamma_inv = 0.0;  // gamma_t^{-1}(r)
    double beta_tilde = 0.0;
    double beta = 0.0;  // beta_t(r) = beta_tilde(gamma_inv, t)
    double p = 0.0, q = 0.0, t = 0.0, r = 0.0;
    double opnorm_input = 0.0;
    bool r_too_large = false;  // r > gamma(0, t); gamma_inv clamps to 0
};

namespace detail {

inline void check_exponents(double p, double q) {
    if (!(p > 1.0) || !(q > p)) throw InvalidArgument("log-Sobolev constants need 1 < p < q");
}

}  // namespace detail

/// 4p(q-1)/(q-p) int_s^t exp(-2 int_r^t K) dr
inline double gamma(const BoundProfile& profile, double p, double q, double s, double t,
                    const ConstantsOptions& opts = {}) {
    detail::check_exponents(p, q);
    return p * (q - 1.0) / (q - p) * semigroup_logsob_constants(profile, s, t, opts).gradient_factor;
}

/// inf{s in [0, t] : gamma(s, t) <= r} by bisection to `tol` in s.
inline double gamma_inverse(const BoundProfile& profile, double p, double q, double t, double r, bool* r_too_large = nullptr,
                            double tol = 1e-8, const ConstantsOptions& opts = {}) {
    detail::check_exponents(p, q);
    if (!(r > 0.0)) throw InvalidArgument("r must be positive");
    const bool too_large = gamma(profile, p, q, 0.0, t, opts) <= r;
    if (r_too_large != nullptr) *r_too_large = too_large;
    if (too_large) return 0.0;
    double lo = 0.0, hi = t;  // gamma(lo) > r >= gamma(hi) = 0
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (gamma(profile, p, q, mid, t, opts) <= r) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

/// pq/(q-p) log ||P^rho_{s,t}||_{(p,t)->(q,s)} + c int_s^t (...) dr with
/// c = p(q-1)/(q-p) (Proof) or c = 1 (Statement).
inline double beta_tilde(const BoundProfile& profile, double p, double q, double s, double t, double opnorm,
                         BetaVariant variant = BetaVariant::Proof, const ConstantsOptions& opts = {}) {
    detail::check_exponents(p, q);
    if (!(opnorm > 0.0)) throw InvalidArgument("operator norm must be positive");
    const double factor = variant == BetaVariant::Proof ? p * (q - 1.0) / (q - p) : 1.0;
    return p * q / (q - p) * std::log(opnorm) + factor * semigroup_logsob_constants(profile, s, t, opts).additive;
}

/// Constants of the measure log-Sobolev inequality at (t, r). `opnorm_at(s)`
/// supplies an upper estimate of ||P^rho_{s,t}||_{(p,t)->(q,s)}.
inline LogSobConstants logsob_constants(const BoundProfile& profile, double p, double q, double t, double r,
                                        const std::function<double(double)>& opnorm_at,
                                        BetaVariant variant = BetaVariant::Proof, const ConstantsOptions& opts = {}) {
    LogSobConstants c;
    c.p = p;
    c.q = q;
    c.t = t;
    c.r = r;
    c.gamma_inv = gamma_inverse(profile, p, q, t, r, &c.r_too_large, 1e-8, opts);
    c.gamma = gamma(profile, p, q, c.gamma_inv, t, opts);
    c.opnorm_input = opnorm_at(c.gamma_inv);
    c.beta_tilde = beta_tilde(profile, p, q, c.gamma_inv, t, c.opnorm_input, variant, opts);
    c.beta = c.beta_tilde;
    return c;
}

/// Bound on ||P^rho_{s,t}||_{(p,t)->(q,s)} from log-Sobolev constants
/// beta_u(r) (u in [s, t]) with r = 4(t-s)/log((q-1)/(p-1)):
/// exp(-int beta_u q'(u)/q(u)^2 du + int (q(u)-1) sup rho^-_u / q(u) du),
/// q(u) = e^{4(t-u)/r}(p-1) + 1.
inline double supercontractive_bound(const BoundProfile& profile, const std::function<double(double)>& beta_at,
                                     double p, double q, double s, double t, const ConstantsOptions& opts = {}) {
    detail::check_exponents(p, q);
    detail::check_interval(profile, s, t);
    if (!(t > s)) throw InvalidArgument("supercontractive bound needs s < t");
    const double r = 4.0 * (t - s) / std::log((q - 1.0) / (p - 1.0));
    auto q_of = [&](double u) { return std::exp(4.0 * (t - u) / r) * (p - 1.0) + 1.0; };
    const double exponent = detail::integrate_time(
        profile,
        [&](double u) {
            const double qu = q_of(u);
            const double dq = -4.0 / r * (qu - 1.0);
            return -beta_at(u) * dq / (qu * qu) + (qu - 1.0) * profile.sup_rho_minus(u) / qu;
        },
        s, t, opts);
    return std::exp(exponent);
}

/// The r at which q(s) = q in the supercontractive bound.
inline double supercontractive_r(double p, double q, double s, double t) {
    detail::check_exponents(p, q);
    return 4.0 * (t - s) / std::log((q - 1.0) / (p - 1.0));
}

/// mu_t(exp(lambda rho_t(o, .)^2)).
inline double exp_square_moment(const EvolvingModel& model, double t, double lambda, const Point& origin,
                                double tol = 1e-11) {
    model.check_time(t);
    if (model.is_sphere()) {
        // Rotation invariance: integrate over the geodesic angle from the origin.
        const double a = 1.0 - 2.0 * t;
        const double scale = 2.0 * std::numbers::pi * a * std::exp(-model.potential().value(t, 0.0));
        return scale * quad::integrate([&](double th) { return std::exp(lambda * a * th * th) * std::sin(th); }, 0.0,
                                       std::numbers::pi, tol);
    }
    const double o = origin.coords[0];
    auto integrand = [&](double th) {
        const double d = model.distance(t, origin, Point::circle(th));
        return std::exp(lambda * d * d) * model.mu_density(t, Point::circle(th));
    };
    // Split at the origin and its antipode in arc length, where rho_t has kinks.
    const double half = 0.5 * model.circumference(t);
    double anti = o + std::numbers::pi;
    if (model.kind() == ModelKind::ConformalCircle) {
        double lo = o, hi = o + kTwoPi;
        for (int i = 0; i < 80; ++i) {
            const double mid = 0.5 * (lo + hi);
            (model.arc_length(t, o, mid) < half ? lo : hi) = mid;
        }
        anti = 0.5 * (lo + hi);
    }
    return quad::integrate(integrand, o, anti, tol) + quad::integrate(integrand, anti, o + kTwoPi, tol);
}

}  // namespace evoheat
