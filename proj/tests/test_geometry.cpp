#include "evoheat/geometry.hpp"
#include "evoheat/profile.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace evoheat;

namespace {

constexpr double kPi = std::numbers::pi;

TrigSeries cos_series(int mode, std::vector<double> coeff_in_t) {
    return TrigSeries({TrigTerm{mode, Polynomial(std::move(coeff_in_t)), Polynomial()}});
}

EvolvingModel conformal_model(TrigSeries potential = {}) {
    return EvolvingModel::conformal_circle(cos_series(1, {0.0, 0.1}), std::move(potential), 2.0);
}

EvolvingModel rich_conformal() {
    // psi = 0.1 t cos(theta) + 0.05 sin(2 theta); phi = 0.5 cos(theta) + 0.2 t sin(theta)
    TrigSeries psi({TrigTerm{1, Polynomial({0.0, 0.1}), Polynomial()}, TrigTerm{2, Polynomial(), Polynomial({0.05})}});
    TrigSeries phi({TrigTerm{1, Polynomial({0.5}), Polynomial({0.0, 0.2})}});
    return EvolvingModel::conformal_circle(psi, phi, 1.5);
}

std::vector<EvolvingModel> all_models() {
    return {EvolvingModel::static_circle(cos_series(1, {1.0})),
            EvolvingModel::scaled_circle(Polynomial({1.0, 0.25}), cos_series(1, {0.5}), 2.0), rich_conformal(),
            EvolvingModel::shrinking_sphere()};
}

Point random_point(const EvolvingModel& m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (m.is_sphere()) return Point::sphere(0.2 + 2.7 * u(rng), kTwoPi * u(rng));
    return Point::circle(kTwoPi * u(rng));
}

Point shifted(Point p, int axis, double h) {
    p.coords[static_cast<std::size_t>(axis)] += h;
    return p;
}

/// Christoffel symbols from centered differences of the metric.
double fd_christoffel(const EvolvingModel& m, double t, const Point& x, int k, int i, int j) {
    const double h = 1e-5;
    const int n = m.dim();
    auto dg = [&](int l, int a, int b) {
        return (m.metric_at(t, shifted(x, l, h))(a, b) - m.metric_at(t, shifted(x, l, -h))(a, b)) / (2 * h);
    };
    const Mat ginv = m.metric_at(t, x).inverse();
    double acc = 0.0;
    for (int l = 0; l < n; ++l) acc += 0.5 * ginv(k, l) * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j));
    return acc;
}

}  // namespace

TEST(Geometry, MetricExamples) {
    const auto flat = EvolvingModel::static_circle();
    EXPECT_DOUBLE_EQ(flat.metric_at(0.3, Point::circle(1.2))(0, 0), 1.0);

    const auto sphere = EvolvingModel::shrinking_sphere();
    const Point x = Point::sphere(1.1, 0.4);
    const Mat g = sphere.metric_at(0.25, x);
    EXPECT_NEAR(g(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(g(1, 1), 0.5 * std::sin(1.1) * std::sin(1.1), 1e-15);
    EXPECT_EQ(g(0, 1), 0.0);

    const auto conf = conformal_model();
    EXPECT_NEAR(conf.metric_at(1.0, Point::circle(0.0))(0, 0), std::exp(0.2), 1e-14);
}

TEST(Geometry, MetricHMatchesTimeDifference) {
    const auto flat = EvolvingModel::static_circle();
    EXPECT_EQ(flat.metric_h_at(0.5, Point::circle(2.0))(0, 0), 0.0);

    const auto sphere = EvolvingModel::shrinking_sphere();
    const Point x = Point::sphere(0.9, 2.0);
    const Mat h = sphere.metric_h_at(0.3, x);
    EXPECT_NEAR(h(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(h(1, 1), std::sin(0.9) * std::sin(0.9), 1e-15);

    const auto conf = conformal_model();
    const double step = 1e-6;
    const Point origin = Point::circle(0.0);
    const double fd = -0.5 * (conf.metric_at(step, origin)(0, 0) - conf.metric_at(0.0, origin)(0, 0)) / step;
    EXPECT_NEAR(conf.metric_h_at(0.0, origin)(0, 0), -0.1, 1e-12);
    EXPECT_NEAR(fd, -0.1, 1e-6);
}

TEST(Geometry, MetricCompatibilityProperty) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& m : all_models()) {
        for (int trial = 0; trial < 50; ++trial) {
            const double t = 0.05 + 0.4 * u(rng);
            const Point x = random_point(m, rng);
            const double h = 1e-5;
            const Mat dg = (m.metric_at(t + h, x) - m.metric_at(t - h, x)) / (2 * h);
            const Mat expected = -2.0 * m.metric_h_at(t, x);
            EXPECT_LT((dg - expected).cwiseAbs().maxCoeff(), 1e-7) << to_string(m.kind());
        }
    }
}

TEST(Geometry, ChristoffelAgainstMetricDifferences) {
    std::mt19937_64 rng(11);
    for (const auto& m : all_models()) {
        for (int trial = 0; trial < 20; ++trial) {
            const Point x = random_point(m, rng);
            const double t = 0.2;
            const Christoffel gamma = m.christoffel(t, x);
            for (int k = 0; k < m.dim(); ++k)
                for (int i = 0; i < m.dim(); ++i)
                    for (int j = 0; j < m.dim(); ++j) {
                        EXPECT_EQ(gamma(k, i, j), gamma(k, j, i));
                        EXPECT_NEAR(gamma(k, i, j), fd_christoffel(m, t, x, k, i, j), 1e-7);
                    }
        }
    }
    const auto flat = EvolvingModel::scaled_circle(Polynomial({1.0, 0.5}), {}, 1.0);
    EXPECT_EQ(flat.christoffel(0.4, Point::circle(1.0))(0, 0, 0), 0.0);
    const auto sphere = EvolvingModel::shrinking_sphere();
    EXPECT_NEAR(sphere.christoffel(0.1, Point::sphere(kPi / 2, 0.0))(0, 1, 1), 0.0, 1e-16);
}

TEST(Geometry, SphereRicciFromGaussCurvature) {
    // K = -(sqrt G)_{polar polar} / sqrt G for g = E dpolar^2 + G dazimuth^2, E constant.
    const auto sphere = EvolvingModel::shrinking_sphere();
    for (double t : {0.0, 0.1, 0.3, 0.45}) {
        const Point x = Point::sphere(1.0, 0.5);
        const double h = 1e-4;
        auto sqrt_g = [&](double polar) { return std::sqrt(sphere.metric_at(t, Point::sphere(polar, 0.5))(1, 1)); };
        const double e = sphere.metric_at(t, x)(0, 0);
        const double second = (sqrt_g(1.0 + h) - 2 * sqrt_g(1.0) + sqrt_g(1.0 - h)) / (h * h);
        const double gauss = -second / (e * sqrt_g(1.0));
        EXPECT_NEAR(gauss, 1.0 / (1.0 - 2.0 * t), 1e-5);
        const Mat endo = sphere.metric_at(t, x).inverse() * sphere.ricci(t, x);
        EXPECT_NEAR(endo(0, 0), gauss, 1e-5);
        EXPECT_NEAR(endo(1, 1), gauss, 1e-5);
        EXPECT_NEAR(endo(0, 1), 0.0, 1e-14);
        // Ricci flow: h_t equals Ric_t.
        EXPECT_EQ(sphere.metric_h_at(t, x), sphere.ricci(t, x));
    }
    EXPECT_EQ(EvolvingModel::static_circle().ricci(0.0, Point::circle(0.0))(0, 0), 0.0);
}

TEST(Geometry, HessianAlongGeodesics) {
    const auto flat = EvolvingModel::static_circle(cos_series(1, {1.0}));
    EXPECT_DOUBLE_EQ(flat.hess_phi(0.0, Point::circle(0.0))(0, 0), -1.0);
    EXPECT_NEAR(flat.grad_phi(0.0, Point::circle(0.0))(0), 0.0, 1e-16);
    EXPECT_EQ(EvolvingModel::static_circle().hess_phi(0.2, Point::circle(1.0))(0, 0), 0.0);

    // Hess phi(v, v) for a g-unit v is the second derivative of phi along the
    // unit-speed geodesic; on a conformal circle dtheta/ds = exp(-psi).
    const auto m = conformal_model(cos_series(1, {1.0}));
    const double t = 0.7;
    for (double theta0 : {0.3, 1.4, 2.9, 5.0}) {
        auto geodesic = [&](double s) {
            const int steps = 400;
            double th = theta0;
            const double ds = s / steps;
            auto speed = [&](double a) { return std::exp(-m.log_scale().value(t, a)); };
            for (int i = 0; i < steps; ++i) {
                const double k1 = speed(th), k2 = speed(th + 0.5 * ds * k1), k3 = speed(th + 0.5 * ds * k2),
                             k4 = speed(th + ds * k3);
                th += ds * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
            }
            return th;
        };
        const double h = 1e-3;
        auto phi_at = [&](double s) { return m.potential().value(t, geodesic(s)); };
        const double second = (phi_at(h) - 2 * phi_at(0.0) + phi_at(-h)) / (h * h);
        const double g = m.metric_at(t, Point::circle(theta0))(0, 0);
        EXPECT_NEAR(m.hess_phi(t, Point::circle(theta0))(0, 0) / g, second, 1e-6);
        const double grad = m.grad_phi(t, Point::circle(theta0))(0);
        EXPECT_NEAR(grad * std::sqrt(g), (phi_at(h) - phi_at(-h)) / (2 * h), 1e-6);
    }
}

TEST(Geometry, VarrhoExamples) {
    EXPECT_EQ(EvolvingModel::static_circle().varrho(0.3, Point::circle(1.0)), 0.0);
    const auto sphere = EvolvingModel::shrinking_sphere();
    EXPECT_NEAR(sphere.varrho(0.25, Point::sphere(1.0, 1.0)), 4.0, 1e-14);
    // -d/dt log mu_t(M) equals varrho for spatially constant varrho.
    const double h = 1e-6;
    const double dlog = -(std::log(sphere.total_measure(0.25 + h)) - std::log(sphere.total_measure(0.25 - h))) / (2 * h);
    EXPECT_NEAR(dlog, 4.0, 1e-6);
    EXPECT_NEAR(conformal_model().varrho(0.6, Point::circle(kPi / 2)), 0.0, 1e-16);
}

TEST(Geometry, MassEvolutionMatchesVarrho) {
    // d/dt mu_t(M) = -mu_t(varrho_t) on every model.
    for (const auto& m : all_models()) {
        const double t = 0.2, h = 1e-5;
        const double dmass = (m.total_measure(t + h) - m.total_measure(t - h)) / (2 * h);
        double integral = 0.0;
        if (m.is_sphere()) {
            integral = m.varrho(t, Point::sphere(1.0, 0.0)) * m.total_measure(t);
        } else {
            integral = quad::integrate(
                [&](double th) { return m.varrho(t, Point::circle(th)) * m.mu_density(t, Point::circle(th)); }, 0.0,
                kTwoPi);
        }
        EXPECT_NEAR(dmass, -integral, 1e-6) << to_string(m.kind());
    }
}

TEST(Geometry, DistanceExamples) {
    const auto sphere = EvolvingModel::shrinking_sphere();
    const Point a = Point::sphere(1.0, 0.3);
    EXPECT_EQ(sphere.distance(0.1, a, a), 0.0);
    const Point north = Point::sphere(0.4, 1.0);
    const Point south = Point::sphere(kPi - 0.4, 1.0 + kPi);
    EXPECT_NEAR(sphere.distance(0.25, north, south), kPi * std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(EvolvingModel::scaled_circle(Polynomial({2.0}), {}, 1.0)
                    .distance(0.0, Point::circle(0.1), Point::circle(kTwoPi - 0.1)),
                0.4, 1e-14);

    // Conformal circle: composite Simpson on both arcs, minimum taken.
    const auto conf = rich_conformal();
    const double t = 0.8;
    auto simpson = [&](double lo, double hi) {
        const int n = 20000;
        const double h = (hi - lo) / n;
        double acc = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            acc += w * std::exp(conf.log_scale().value(t, lo + i * h));
        }
        return acc * h / 3.0;
    };
    for (auto [x, y] : {std::pair{0.2, 2.5}, std::pair{1.0, 5.5}, std::pair{4.0, 0.5}}) {
        const double lo = std::min(x, y), hi = std::max(x, y);
        const double expected = std::min(simpson(lo, hi), simpson(hi, lo + kTwoPi));
        EXPECT_NEAR(conf.distance(t, Point::circle(x), Point::circle(y)), expected, 1e-8);
    }
}

TEST(Geometry, DistanceIsAMetric) {
    std::mt19937_64 rng(3);
    for (const auto& m : all_models()) {
        for (int trial = 0; trial < 100; ++trial) {
            const Point a = random_point(m, rng), b = random_point(m, rng), c = random_point(m, rng);
            const double t = 0.3;
            EXPECT_NEAR(m.distance(t, a, b), m.distance(t, b, a), 1e-12);
            EXPECT_LE(m.distance(t, a, c), m.distance(t, a, b) + m.distance(t, b, c) + 1e-8);
            EXPECT_GE(m.distance(t, a, b), 0.0);
        }
    }
}

TEST(Geometry, MeasuresAndBalls) {
    EXPECT_NEAR(EvolvingModel::static_circle().total_measure(0.0), kTwoPi, 1e-13);
    const auto sphere = EvolvingModel::shrinking_sphere();
    EXPECT_NEAR(sphere.total_measure(0.2), 4 * kPi * 0.6, 1e-13);
    EXPECT_NEAR(sphere.measure_mu(0.2, Region{0.0, kPi, 0.0, kTwoPi}), 4 * kPi * 0.6, 1e-13);
    const Point x = Point::sphere(1.0, 1.0);
    EXPECT_EQ(sphere.ball_volume(0.2, x, 10.0), sphere.total_measure(0.2));
    EXPECT_NEAR(sphere.ball_volume(0.0, x, kPi / 2), 2 * kPi, 1e-13);

    const auto flat = EvolvingModel::static_circle();
    EXPECT_NEAR(flat.ball_volume(0.1, Point::circle(0.0), 0.5), 1.0, 1e-13);
    EXPECT_NEAR(flat.ball_volume(0.1, Point::circle(0.0), 4.0), kTwoPi, 1e-13);

    // Conformal ball: measure of the coordinate arc whose endpoints sit at distance r.
    const auto conf = rich_conformal();
    const Point c = Point::circle(1.0);
    const double r = 0.7, t = 0.4;
    const double vol = conf.ball_volume(t, c, r);
    double lo = 1.0, hi = 1.0;
    while (conf.arc_length(t, 1.0, hi) < r) hi += 1e-4;
    while (conf.arc_length(t, lo, 1.0) < r) lo -= 1e-4;
    const double approx = conf.measure_mu(t, Region{lo, hi, 0, 0});
    EXPECT_NEAR(vol, approx, 5e-4);
    EXPECT_GT(conf.ball_volume(t, c, 0.8), vol);
}

TEST(Geometry, SphereChartsAgree) {
    const auto sphere = EvolvingModel::shrinking_sphere();
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Point p = random_point(sphere, rng);
        const Point q = sphere.rechart(p);
        EXPECT_EQ(q.chart, 1 - p.chart);
        EXPECT_LT((sphere.embed(p) - sphere.embed(q)).norm(), 1e-12);
        EXPECT_NEAR(sphere.standard_angle(p), sphere.standard_angle(q), 1e-12);
        // Tangent vectors keep their g-length across the chart change.
        if (q.coords[0] < 0.01 || q.coords[0] > kPi - 0.01) continue;
        Mat v(2, 1);
        v << 0.3, -0.7;
        const Mat w = sphere.rechart_vectors(p, q, v);
        const double n1 = (v.transpose() * sphere.metric_at(0.1, p) * v)(0, 0);
        const double n2 = (w.transpose() * sphere.metric_at(0.1, q) * w)(0, 0);
        EXPECT_NEAR(n1, n2, 1e-10);
    }
}

TEST(Geometry, Errors) {
    const auto conf = conformal_model();
    EXPECT_THROW((void)conf.metric_at(2.0, Point::circle(0.0)), TimeOutOfRange);
    EXPECT_THROW((void)conf.metric_at(-0.1, Point::circle(0.0)), TimeOutOfRange);
    const auto sphere = EvolvingModel::shrinking_sphere();
    EXPECT_THROW((void)sphere.metric_at(0.5, Point::sphere(1.0, 0.0)), TimeOutOfRange);
    EXPECT_THROW((void)sphere.metric_at(0.1, Point::sphere(1e-4, 0.0)), ChartError);
    EXPECT_THROW((void)sphere.metric_at(0.1, Point{{std::nan(""), 0.0}, 0}), ChartError);
    EXPECT_THROW((void)EvolvingModel::shrinking_sphere({}, 0.6), ConfigError);
    EXPECT_THROW((void)EvolvingModel::shrinking_sphere(cos_series(1, {1.0})), ConfigError);
    const auto collapsing = EvolvingModel::scaled_circle(Polynomial({1.0, -2.0}), {}, 1.0);
    EXPECT_THROW((void)collapsing.metric_at(0.6, Point::circle(0.0)), SingularMetric);
}

TEST(BoundProfile, SphereClosedForm) {
    const auto profile = bound_profile(EvolvingModel::shrinking_sphere());
    EXPECT_EQ(profile.provenance(), Provenance::ClosedForm);
    for (double t : {0.0, 0.1, 0.3, 0.45}) {
        EXPECT_NEAR(profile.K1(t), 2.0 / (1.0 - 2.0 * t), 1e-14);
        EXPECT_EQ(profile.K2(t), 0.0);
        EXPECT_EQ(profile.kappa(t), 0.0);
        EXPECT_NEAR(profile.sup_rho_plus(t), 2.0 / (1.0 - 2.0 * t), 1e-14);
        EXPECT_EQ(profile.sup_rho_minus(t), 0.0);
    }
    EXPECT_TRUE(profile.kappa_is_zero());
}

TEST(BoundProfile, FlatCircleIsZero) {
    const auto profile = bound_profile(EvolvingModel::static_circle());
    EXPECT_EQ(profile.K(0.3), 0.0);
    EXPECT_EQ(profile.K2(0.3), 0.0);
    EXPECT_EQ(profile.kappa(0.3), 0.0);
    EXPECT_EQ(profile.sup_rho_plus(0.3), 0.0);
    EXPECT_EQ(profile.sup_rho_minus(0.3), 0.0);
    EXPECT_TRUE(profile.rho_is_zero());
}

TEST(BoundProfile, ConformalGridMatchesAnalyticMinimum) {
    // psi_t = 0.1 cos(theta), phi = 0: K(t) = min(-0.1 cos) = -0.1, K2 = -0.1,
    // kappa = max |0.1 sin(theta)| exp(-0.1 t cos(theta)).
    const auto m = conformal_model();
    const auto profile = bound_profile(m);
    EXPECT_EQ(profile.provenance(), Provenance::GridExtremized);
    for (double t : {0.0, 0.37, 1.2, 1.9}) {
        EXPECT_NEAR(profile.K(t), -0.1, 1e-6);
        EXPECT_NEAR(profile.K2(t), -0.1, 1e-6);
        double kappa = 0.0;
        for (int i = 0; i < 200000; ++i) {
            const double th = kTwoPi * i / 200000.0;
            kappa = std::max(kappa, std::abs(0.1 * std::sin(th)) * std::exp(-0.1 * t * std::cos(th)));
        }
        EXPECT_NEAR(profile.kappa(t), kappa, 1e-6);
        EXPECT_NEAR(profile.sup_rho_plus(t), 0.1, 1e-6);
        EXPECT_NEAR(profile.sup_rho_minus(t), 0.1, 1e-6);
    }
}

TEST(BoundProfile, IsALowerBoundProperty) {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& m : all_models()) {
        const auto profile = bound_profile(m);
        const double tmax = std::min(m.horizon(), 0.49);
        for (int trial = 0; trial < 1000; ++trial) {
            const double t = tmax * u(rng);
            const Point x = random_point(m, rng);
            EXPECT_GE(m.curvature_lower(t, x, -1), profile.K1(t) - 1e-6);
            EXPECT_GE(m.curvature_lower(t, x, +1), profile.K2(t) - 1e-6);
            EXPECT_LE(m.d_varrho_norm(t, x), profile.kappa(t) + 1e-6);
            EXPECT_LE(m.varrho(t, x), profile.sup_rho(t) + 1e-6);
            EXPECT_GE(m.varrho(t, x), profile.inf_rho(t) - 1e-6);
        }
    }
}
