#pragma once

// Closed-form evolving model manifolds and their tensors.
//
// Three families are provided:
//   ScaledCircle      g_t = c(t)^2 dtheta^2,          c a polynomial in t
//   ConformalCircle   g_t = exp(2 psi(t,theta)) dtheta^2, psi a trig series
//   ShrinkingSphere2  g_t = (1 - 2t) g_round           (Ricci flow from the unit sphere)
// Each carries a potential phi_t; mu_t = exp(-phi_t) vol_t.

#include "evoheat/errors.hpp"
#include "evoheat/linalg.hpp"
#include "evoheat/quadrature.hpp"
#include "evoheat/series.hpp"

#include <boost/math/tools/roots.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

namespace evoheat {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double wrap_angle(double theta) {
    double w = std::fmod(theta, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    if (w >= kTwoPi) w -= kTwoPi;
    return w;
}

enum class ModelKind { ScaledCircle, ConformalCircle, ShrinkingSphere2 };

inline std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::ScaledCircle: return "ScaledCircle";
        case ModelKind::ConformalCircle: return "ConformalCircle";
        case ModelKind::ShrinkingSphere2: return "ShrinkingSphere2";
    }
    return "unknown";
}

/// Chart coordinates: theta for circles, (polar, azimuth) for the sphere.
/// Sphere chart 0 is polar about the z axis, chart 1 polar about the x axis.
struct Point {
    std::array<double, 2> coords{};
    int chart = 0;

    static Point circle(double theta) { return Point{{wrap_angle(theta), 0.0}, 0}; }
    static Point sphere(double polar, double azimuth, int chart = 0) {
        return Point{{polar, wrap_angle(azimuth)}, chart};
    }
};

/// Coordinate box (chart 0). Circles use [lo0, hi0] only.
struct Region {
    double lo0 = 0.0;
    double hi0 = kTwoPi;
    double lo1 = 0.0;
    double hi1 = kTwoPi;
};

/// Everything the path engine needs at one space-time point.
struct LocalGeometry {
    int dim = 1;
    Mat g;
    Mat g_inv;
    Mat h;  // h_t = -1/2 d/dt g_t
    Mat ricci;
    Mat hess_phi;
    Christoffel gamma;
    Vec grad_phi;  // raised with g_t
    Vec d_varrho;  // covector
    double phi = 0.0;
    double varrho = 0.0;

    /// Ito drift of the coordinate process: -g^{ij} Gamma^k_{ij} - (grad phi)^k.
    [[nodiscard]] Vec drift() const {
        Vec out = -grad_phi;
        for (int k = 0; k < dim; ++k)
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) out(k) -= g_inv(i, j) * gamma(k, i, j);
        return out;
    }
};

class EvolvingModel {
public:
    static EvolvingModel scaled_circle(Polynomial scale, TrigSeries potential, double horizon) {
        EvolvingModel m;
        m.kind_ = ModelKind::ScaledCircle;
        m.scale_ = std::move(scale);
        m.potential_ = std::move(potential);
        m.horizon_ = horizon;
        m.validate();
        return m;
    }

    static EvolvingModel static_circle(TrigSeries potential = {}, double horizon = 1.0) {
        return scaled_circle(Polynomial({1.0}), std::move(potential), horizon);
    }

    static EvolvingModel conformal_circle(TrigSeries log_scale, TrigSeries potential = {}, double horizon = 1.0) {
        EvolvingModel m;
        m.kind_ = ModelKind::ConformalCircle;
        m.log_scale_ = std::move(log_scale);
        m.potential_ = std::move(potential);
        m.horizon_ = horizon;
        m.validate();
        return m;
    }

    /// Sphere potentials must be spatially constant (the oracle reduction
    /// and chart changes rely on rotation invariance).
    static EvolvingModel shrinking_sphere(TrigSeries potential = {}, double horizon = 0.5, double pole_margin = 1e-3) {
        EvolvingModel m;
        m.kind_ = ModelKind::ShrinkingSphere2;
        m.potential_ = std::move(potential);
        m.horizon_ = horizon;
        m.pole_margin_ = pole_margin;
        m.validate();
        return m;
    }

    [[nodiscard]] ModelKind kind() const { return kind_; }
    [[nodiscard]] int dim() const { return kind_ == ModelKind::ShrinkingSphere2 ? 2 : 1; }
    [[nodiscard]] bool is_sphere() const { return kind_ == ModelKind::ShrinkingSphere2; }
    [[nodiscard]] double horizon() const { return horizon_; }
    [[nodiscard]] double pole_margin() const { return pole_margin_; }
    [[nodiscard]] const Polynomial& scale() const { return scale_; }
    [[nodiscard]] const TrigSeries& log_scale() const { return log_scale_; }
    [[nodiscard]] const TrigSeries& potential() const { return potential_; }
    [[nodiscard]] bool potential_is_zero() const { return potential_.is_zero(); }

    void check_time(double t) const {
        if (!(t >= 0.0) || !(t < horizon_))
            throw TimeOutOfRange("time " + std::to_string(t) + " outside [0, " + std::to_string(horizon_) + ")");
    }

    void check_point(const Point& x) const {
        if (!std::isfinite(x.coords[0]) || !std::isfinite(x.coords[1])) throw ChartError("non-finite coordinates");
        if (is_sphere()) {
            if (x.chart != 0 && x.chart != 1) throw ChartError("sphere chart must be 0 or 1");
            const double polar = x.coords[0];
            if (polar < pole_margin_ || polar > std::numbers::pi - pole_margin_)
                throw ChartError("polar angle inside the pole-exclusion margin");
        } else if (x.chart != 0) {
            throw ChartError("circle models have a single chart");
        }
    }

    // ---- circle helpers ---------------------------------------------------

    /// psi with g = exp(2 psi) on circle models.
    [[nodiscard]] TrigEval log_scale_at(double t, double theta) const {
        if (kind_ == ModelKind::ConformalCircle) return log_scale_.eval(t, theta);
        const double c = scale_(t);
        if (!(c > 0.0)) throw SingularMetric("scale c(t) is not positive at t = " + std::to_string(t));
        TrigEval out;
        out.f = std::log(c);
        out.f_t = scale_.derivative(t) / c;
        return out;
    }

    [[nodiscard]] LocalGeometry local(double t, const Point& x) const {
        check_time(t);
        check_point(x);
        return is_sphere() ? sphere_local(t, x) : circle_local(t, x);
    }

    [[nodiscard]] Mat metric_at(double t, const Point& x) const { return local(t, x).g; }
    [[nodiscard]] Mat metric_h_at(double t, const Point& x) const { return local(t, x).h; }
    [[nodiscard]] Christoffel christoffel(double t, const Point& x) const { return local(t, x).gamma; }
    [[nodiscard]] Mat ricci(double t, const Point& x) const { return local(t, x).ricci; }
    [[nodiscard]] Mat hess_phi(double t, const Point& x) const { return local(t, x).hess_phi; }
    [[nodiscard]] Vec grad_phi(double t, const Point& x) const { return local(t, x).grad_phi; }
    [[nodiscard]] double varrho(double t, const Point& x) const { return local(t, x).varrho; }
    [[nodiscard]] Vec d_varrho(double t, const Point& x) const { return local(t, x).d_varrho; }

    /// Smallest g-eigenvalue of Ric - 1/2 d_t g + Hess phi (sign = -1) or
    /// Ric + 1/2 d_t g + Hess phi (sign = +1).
    [[nodiscard]] double curvature_lower(double t, const Point& x, int sign) const {
        const LocalGeometry geo = local(t, x);
        const Mat tensor = geo.ricci + (sign < 0 ? Mat(geo.h) : Mat(-geo.h)) + geo.hess_phi;
        return smallest_relative_eigenvalue(tensor, geo.g);
    }

    /// |d varrho_t|_{g_t}.
    [[nodiscard]] double d_varrho_norm(double t, const Point& x) const {
        const LocalGeometry geo = local(t, x);
        return std::sqrt(std::max(0.0, (geo.d_varrho.transpose() * geo.g_inv * geo.d_varrho)(0, 0)));
    }

    /// Density of mu_t with respect to chart Lebesgue measure.
    [[nodiscard]] double mu_density(double t, const Point& x) const {
        check_time(t);
        if (is_sphere()) return std::exp(-potential_.value(t, 0.0)) * (1.0 - 2.0 * t) * std::sin(x.coords[0]);
        return std::exp(log_scale_at(t, x.coords[0]).f - potential_.value(t, x.coords[0]));
    }

    // ---- sphere charts ----------------------------------------------------

    [[nodiscard]] Eigen::Vector3d embed(const Point& x) const {
        const double st = std::sin(x.coords[0]);
        const Eigen::Vector3d local_xyz(st * std::cos(x.coords[1]), st * std::sin(x.coords[1]), std::cos(x.coords[0]));
        return to_ambient(local_xyz, x.chart);
    }

    /// Columns d(ambient)/d(polar), d(ambient)/d(azimuth).
    [[nodiscard]] Eigen::Matrix<double, 3, 2> embedding_jacobian(const Point& x) const {
        const double st = std::sin(x.coords[0]), ct = std::cos(x.coords[0]);
        const double sp = std::sin(x.coords[1]), cp = std::cos(x.coords[1]);
        Eigen::Matrix<double, 3, 2> jac;
        jac.col(0) = to_ambient(Eigen::Vector3d(ct * cp, ct * sp, -st), x.chart);
        jac.col(1) = to_ambient(Eigen::Vector3d(-st * sp, st * cp, 0.0), x.chart);
        return jac;
    }

    [[nodiscard]] static Point from_ambient(const Eigen::Vector3d& p, int chart) {
        const Eigen::Vector3d l = chart == 0 ? p : Eigen::Vector3d(p.y(), p.z(), p.x());
        const double r = l.norm();
        const double polar = std::acos(std::clamp(l.z() / r, -1.0, 1.0));
        return Point::sphere(polar, std::atan2(l.y(), l.x()), chart);
    }

    /// Chart-independent angle: theta on circles, polar angle from +z on the sphere.
    [[nodiscard]] double standard_angle(const Point& x) const {
        if (!is_sphere()) return wrap_angle(x.coords[0]);
        if (x.chart == 0) return x.coords[0];
        return std::acos(std::clamp(embed(x).z(), -1.0, 1.0));
    }

    [[nodiscard]] bool needs_rechart(const Point& x) const {
        return is_sphere() && std::abs(std::cos(x.coords[0])) > std::numbers::sqrt2 / 2.0;
    }

    /// Same point in the other sphere chart.
    [[nodiscard]] Point rechart(const Point& x) const { return from_ambient(embed(x), 1 - x.chart); }

    /// Re-express tangent vectors (matrix columns) given at `from` in the chart of `to`.
    [[nodiscard]] Mat rechart_vectors(const Point& from, const Point& to, const Mat& columns) const {
        const auto jf = embedding_jacobian(from);
        const auto jt = embedding_jacobian(to);
        const double s2 = std::sin(to.coords[0]) * std::sin(to.coords[0]);
        Mat out(2, columns.cols());
        for (Eigen::Index c = 0; c < columns.cols(); ++c) {
            const Eigen::Vector3d v = jf * Eigen::Vector2d(columns(0, c), columns(1, c));
            out(0, c) = jt.col(0).dot(v);
            out(1, c) = jt.col(1).dot(v) / s2;
        }
        return out;
    }

    /// Moves a point that left its chart's nominal range back into canonical form.
    [[nodiscard]] Point canonical(const Point& x) const {
        if (!is_sphere()) return Point::circle(x.coords[0]);
        return from_ambient(embed(x), x.chart);
    }

    // ---- distance and measure ---------------------------------------------

    [[nodiscard]] double distance(double t, const Point& x, const Point& y) const {
        check_time(t);
        check_point(x);
        check_point(y);
        if (is_sphere()) {
            const Eigen::Vector3d a = embed(x), b = embed(y);
            return std::sqrt(1.0 - 2.0 * t) * std::atan2(a.cross(b).norm(), a.dot(b));
        }
        const double delta = wrap_angle(y.coords[0] - x.coords[0]);
        if (kind_ == ModelKind::ScaledCircle) {
            const double c = scale_(t);
            return c * std::min(delta, kTwoPi - delta);
        }
        const double forward = arc_length(t, x.coords[0], x.coords[0] + delta);
        return std::min(forward, circumference(t) - forward);
    }

    /// g_t-length of the coordinate arc [a, b] on a circle model.
    [[nodiscard]] double arc_length(double t, double a, double b) const {
        if (kind_ == ModelKind::ScaledCircle) return scale_(t) * (b - a);
        return quad::integrate([&](double th) { return std::exp(log_scale_.value(t, th)); }, a, b, 1e-13);
    }

    [[nodiscard]] double circumference(double t) const { return arc_length(t, 0.0, kTwoPi); }

    [[nodiscard]] double total_measure(double t) const {
        check_time(t);
        if (is_sphere()) return 4.0 * std::numbers::pi * (1.0 - 2.0 * t) * std::exp(-potential_.value(t, 0.0));
        return circle_mu(t, 0.0, kTwoPi);
    }

    [[nodiscard]] double measure_mu(double t, const Region& region) const {
        check_time(t);
        if (is_sphere()) {
            return std::exp(-potential_.value(t, 0.0)) * (1.0 - 2.0 * t) *
                   (std::cos(region.lo0) - std::cos(region.hi0)) * (region.hi1 - region.lo1);
        }
        return circle_mu(t, region.lo0, region.hi0);
    }

    /// mu_t of the metric ball B_t(center, radius); saturates at the total measure.
    [[nodiscard]] double ball_volume(double t, const Point& center, double radius) const {
        check_time(t);
        check_point(center);
        if (radius <= 0.0) return 0.0;
        if (is_sphere()) {
            const double cap = radius / std::sqrt(1.0 - 2.0 * t);
            if (cap >= std::numbers::pi) return total_measure(t);
            return std::exp(-potential_.value(t, 0.0)) * (1.0 - 2.0 * t) * 2.0 * std::numbers::pi *
                   (1.0 - std::cos(cap));
        }
        const double theta = center.coords[0];
        if (2.0 * radius >= circumference(t)) return total_measure(t);
        const double hi = arc_endpoint(t, theta, radius, +1);
        const double lo = arc_endpoint(t, theta, radius, -1);
        return circle_mu(t, lo, hi);
    }

private:
    EvolvingModel() = default;

    void validate() const {
        if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw ConfigError("model horizon must be finite and > 0");
        if (is_sphere()) {
            if (horizon_ > 0.5) throw ConfigError("ShrinkingSphere2 requires horizon <= 1/2");
            if (!potential_.is_spatially_constant())
                throw ConfigError("ShrinkingSphere2 supports only spatially constant potentials");
            if (!(pole_margin_ > 0.0 && pole_margin_ < 0.5)) throw ConfigError("pole margin must lie in (0, 0.5)");
        }
        if (kind_ == ModelKind::ScaledCircle && !(scale_(0.0) > 0.0))
            throw ConfigError("ScaledCircle requires c(0) > 0");
    }

    static Eigen::Vector3d to_ambient(const Eigen::Vector3d& l, int chart) {
        return chart == 0 ? l : Eigen::Vector3d(l.z(), l.x(), l.y());
    }

    [[nodiscard]] LocalGeometry circle_local(double t, const Point& x) const {
        const double theta = x.coords[0];
        const TrigEval psi = log_scale_at(t, theta);
        const TrigEval phi = potential_.eval(t, theta);
        const double g = std::exp(2.0 * psi.f);
        LocalGeometry geo;
        geo.dim = 1;
        geo.g = Mat::Constant(1, 1, g);
        geo.g_inv = Mat::Constant(1, 1, 1.0 / g);
        geo.h = Mat::Constant(1, 1, -psi.f_t * g);
        geo.ricci = Mat::Zero(1, 1);
        geo.gamma.dim = 1;
        geo.gamma(0, 0, 0) = psi.f_x;
        geo.hess_phi = Mat::Constant(1, 1, phi.f_xx - psi.f_x * phi.f_x);
        geo.grad_phi = Vec::Constant(1, phi.f_x / g);
        geo.phi = phi.f;
        geo.varrho = phi.f_t - psi.f_t;
        geo.d_varrho = Vec::Constant(1, phi.f_tx - psi.f_tx);
        return geo;
    }

    [[nodiscard]] LocalGeometry sphere_local(double t, const Point& x) const {
        const double a = 1.0 - 2.0 * t;
        const double st = std::sin(x.coords[0]), ct = std::cos(x.coords[0]);
        LocalGeometry geo;
        geo.dim = 2;
        Mat round = Mat::Zero(2, 2);
        round(0, 0) = 1.0;
        round(1, 1) = st * st;
        geo.g = a * round;
        geo.g_inv = Mat::Zero(2, 2);
        geo.g_inv(0, 0) = 1.0 / a;
        geo.g_inv(1, 1) = 1.0 / (a * st * st);
        geo.h = round;
        geo.ricci = round;
        geo.hess_phi = Mat::Zero(2, 2);
        geo.gamma.dim = 2;
        geo.gamma(0, 1, 1) = -st * ct;
        geo.gamma(1, 0, 1) = ct / st;
        geo.gamma(1, 1, 0) = ct / st;
        geo.grad_phi = Vec::Zero(2);
        const TrigEval phi = potential_.eval(t, 0.0);
        geo.phi = phi.f;
        geo.varrho = phi.f_t + 2.0 / a;
        geo.d_varrho = Vec::Zero(2);
        return geo;
    }

    [[nodiscard]] double circle_mu(double t, double a, double b) const {
        return quad::integrate(
            [&](double th) { return std::exp(log_scale_at(t, th).f - potential_.value(t, th)); }, a, b, 1e-13);
    }

    /// Coordinate where the arc from theta in direction dir reaches g_t-length len.
    [[nodiscard]] double arc_endpoint(double t, double theta, double len, int dir) const {
        if (kind_ == ModelKind::ScaledCircle) return theta + dir * len / scale_(t);
        auto residual = [&](double span) {
            return (dir > 0 ? arc_length(t, theta, theta + span) : arc_length(t, theta - span, theta)) - len;
        };
        std::uintmax_t iters = 100;
        auto [lo, hi] = boost::math::tools::toms748_solve(residual, 0.0, kTwoPi, residual(0.0), residual(kTwoPi),
                                                          boost::math::tools::eps_tolerance<double>(50), iters);
        return theta + dir * 0.5 * (lo + hi);
    }

    ModelKind kind_ = ModelKind::ScaledCircle;
    Polynomial scale_{std::vector<double>{1.0}};
    TrigSeries log_scale_;
    TrigSeries potential_;
    double horizon_ = 1.0;
    double pole_margin_ = 1e-3;
};

}  // namespace evoheat
