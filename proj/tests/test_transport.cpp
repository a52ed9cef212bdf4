#include "evoheat/profile.hpp"
#include "evoheat/transport.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace evoheat;

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

/// Frame carried around a closed coordinate square [p0, p0+side] x [a0, a0+side] at fixed t.
Mat carry_around_square(const EvolvingModel& m, const Frame& start, double p0, double a0, double side, int steps,
                        double t) {
    Frame f = start;
    Point x = Point::sphere(p0, a0);
    const double h = side / steps;
    const std::array<Vec, 4> dirs = {vec2(h, 0), vec2(0, h), vec2(-h, 0), vec2(0, -h)};
    for (const Vec& d : dirs) {
        for (int i = 0; i < steps; ++i) {
            f = transport_step(m, f, x, d, t, 0.0);
            x.coords[0] += d(0);
            x.coords[1] += d(1);
        }
    }
    return f.columns;
}

}  // namespace

TEST(Transport, FlatCircleFrameUnchanged) {
    const auto m = EvolvingModel::static_circle();
    Frame f = initial_frame(m, Point::circle(1.0), 0.0);
    Point x = Point::circle(1.0);
    for (int i = 0; i < 100; ++i) {
        Vec dx = Vec::Constant(1, 0.05 * std::sin(i));
        f = transport_step(m, f, x, dx, f.t, 1e-3);
        x = Point::circle(x.coords[0] + dx(0));
    }
    EXPECT_DOUBLE_EQ(f.columns(0, 0), 1.0);
}

TEST(Transport, SphereTimeOnlyTransportStaysOrthonormal) {
    const auto m = EvolvingModel::shrinking_sphere();
    const Point x = Point::sphere(1.2, 0.3);
    Frame f = initial_frame(m, x, 0.0);
    const double dt = 1e-3;
    for (int i = 0; i < 200; ++i) f = transport_step(m, f, x, Vec::Zero(2), f.t, dt);
    const Mat gram = f.columns.transpose() * m.metric_at(f.t, x) * f.columns;
    EXPECT_LT((gram - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
    // Columns scale as (1 - 2t)^{-1/2} and keep their directions.
    EXPECT_NEAR(f.columns(0, 0), 1.0 / std::sqrt(1.0 - 2.0 * f.t), 1e-12);
    EXPECT_NEAR(f.columns(1, 0), 0.0, 1e-14);
}

TEST(Transport, SphereHolonomyMatchesEnclosedCurvature) {
    const auto m = EvolvingModel::shrinking_sphere();
    for (double t : {0.0, 0.2}) {
        const double p0 = kPi / 2 - 0.1, a0 = 0.0, side = 0.2;
        const Frame start = initial_frame(m, Point::sphere(p0, a0), t);
        const Mat end = carry_around_square(m, start, p0, a0, side, 200, t);
        // Rotation angle measured in the orthonormal basis of the start frame.
        const Mat g = m.metric_at(t, Point::sphere(p0, a0));
        const Mat rot = start.columns.transpose() * g * end;
        const double angle = std::abs(std::atan2(rot(1, 0), rot(0, 0)));
        // Area of the square times Gauss curvature 1/(1-2t); the area scales by (1-2t).
        const double area_round = side * (std::cos(p0) - std::cos(p0 + side));
        EXPECT_NEAR(angle, area_round, 0.05 * area_round) << "t=" << t;
    }
}

TEST(Transport, IsometryAfterEachStep) {
    const auto m = EvolvingModel::shrinking_sphere();
    Point x = Point::sphere(1.0, 0.0);
    Frame f = initial_frame(m, x, 0.0);
    for (int i = 0; i < 300; ++i) {
        const Vec dx = vec2(0.03 * std::cos(0.1 * i), 0.04 * std::sin(0.07 * i));
        f = transport_step(m, f, x, dx, f.t, 1e-3);
        x.coords[0] += dx(0);
        x.coords[1] += dx(1);
        for (int c = 0; c < 2; ++c) {
            const double norm = (f.columns.col(c).transpose() * m.metric_at(f.t, x) * f.columns.col(c))(0, 0);
            ASSERT_NEAR(norm, 1.0, 1e-8);
        }
    }
}

TEST(Transport, DampingFlatIsIdentity) {
    const auto m = EvolvingModel::static_circle();
    const Point x = Point::circle(0.5);
    const Frame f = initial_frame(m, x, 0.0);
    DampingMatrix q = DampingMatrix::identity(1, 0.0);
    for (int i = 0; i < 100; ++i) q = q_step(m, q, f, x, 0.01 * i, 0.01);
    EXPECT_EQ(q.Q(0, 0), 1.0);
}

TEST(Transport, DampingSphereClosedForm) {
    // dQ/dt = -2/(1-2t) Q, Q(0) = 1  =>  Q(t) = 1 - 2t.
    const auto m = EvolvingModel::shrinking_sphere();
    const Point x = Point::sphere(1.0, 0.0);
    const double t_end = 0.4;
    auto run = [&](double dt, Integrator integ) {
        Frame f = initial_frame(m, x, 0.0);
        DampingMatrix q = DampingMatrix::identity(2, 0.0);
        const int n = static_cast<int>(std::lround(t_end / dt));
        for (int i = 0; i < n; ++i) {
            const Mat a_now = pulled_back_tensor(m, f, x, f.t);
            const Frame next = transport_step(m, f, x, Vec::Zero(2), f.t, dt);
            const Mat a_next = pulled_back_tensor(m, next, x, next.t);
            q = q_step(q, a_now, a_next, dt, integ);
            f = next;
        }
        return (q.Q - (1.0 - 2.0 * t_end) * Mat::Identity(2, 2)).cwiseAbs().maxCoeff();
    };
    // Euler telescopes exactly on this ODE: (1 - 2t_n - 2dt)/(1 - 2t_n) per step.
    EXPECT_LT(run(1e-3, Integrator::Euler), 1e-12);
    EXPECT_LT(run(1e-3, Integrator::Heun), 1e-5);
}

TEST(Transport, DampingFrozenPathOnPotential) {
    // Static circle, phi = cos(theta), path frozen at 0: Hess phi = -1, Q = e^t.
    const auto m = EvolvingModel::static_circle(TrigSeries({TrigTerm{1, Polynomial({1.0}), Polynomial()}}));
    const Point x = Point::circle(0.0);
    const Frame f = initial_frame(m, x, 0.0);
    DampingMatrix q = DampingMatrix::identity(1, 0.0);
    const double dt = 1e-3;
    for (int i = 0; i < 500; ++i) {
        const Mat a = pulled_back_tensor(m, f, x, i * dt);
        q = q_step(q, a, a, dt, Integrator::Heun);
    }
    EXPECT_NEAR(q.Q(0, 0), std::exp(0.5), 1e-6);
}

TEST(Transport, DampingConsistencyOrder) {
    const auto m = EvolvingModel::static_circle(TrigSeries({TrigTerm{1, Polynomial({1.0}), Polynomial()}}));
    const Point x = Point::circle(0.0);
    const Frame f = initial_frame(m, x, 0.0);
    auto error = [&](double dt, Integrator integ) {
        DampingMatrix q = DampingMatrix::identity(1, 0.0);
        const int n = static_cast<int>(std::lround(0.5 / dt));
        for (int i = 0; i < n; ++i) {
            const Mat a = pulled_back_tensor(m, f, x, i * dt);
            q = q_step(q, a, a, dt, integ);
        }
        return std::abs(q.Q(0, 0) - std::exp(0.5));
    };
    EXPECT_NEAR(error(1e-2, Integrator::Euler) / error(5e-3, Integrator::Euler), 2.0, 0.1);
    EXPECT_NEAR(error(1e-2, Integrator::Heun) / error(5e-3, Integrator::Heun), 4.0, 0.2);
}
