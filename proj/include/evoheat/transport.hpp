#pragma once

// Frame transport under the space-time connection
//   nabla_{d_t} X = d_t X + 1/2 (d_t g)(X, .)^sharp
// and the damping matrix Q_{s,t} driven by Ric - 1/2 d_t g + Hess phi.

#include "evoheat/geometry.hpp"
#include "evoheat/linalg.hpp"

#include <cmath>

namespace evoheat {

enum class Integrator { Euler, Heun };

/// Columns form a g_t-orthonormal basis in chart coordinates.
struct Frame {
    Mat columns;
    double t = 0.0;
};

/// Q_{s,t} in the coordinates of the initial frame U_s.
struct DampingMatrix {
    Mat Q;
    double s = 0.0;

    static DampingMatrix identity(int dim, double s) { return {Mat::Identity(dim, dim), s}; }
};

/// Gram-Schmidt against the inner product g.
inline Mat orthonormalize(const Mat& columns, const Mat& g) {
    Mat out = columns;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            const double proj = (out.col(i).transpose() * g * out.col(j))(0, 0);
            out.col(j) -= proj * out.col(i);
        }
        const double norm = std::sqrt((out.col(j).transpose() * g * out.col(j))(0, 0));
        out.col(j) /= norm;
    }
    return out;
}

/// A g_t-orthonormal frame at x; on the sphere the first column is the polar direction.
inline Frame initial_frame(const EvolvingModel& model, const Point& x, double t) {
    const Mat g = model.metric_at(t, x);
    return {orthonormalize(Mat::Identity(model.dim(), model.dim()), g), t};
}

/// Christoffel correction -Gamma(dx, U) applied column by column.
inline Mat connection_increment(const Christoffel& gamma, const Vec& dx, const Mat& columns) {
    Mat out(columns.rows(), columns.cols());
    for (Eigen::Index c = 0; c < columns.cols(); ++c) out.col(c) = -gamma.contract(dx, Vec(columns.col(c)));
    return out;
}

/// Transports the frame along the chart displacement dx over [t, t + dt].
/// Spatial part: Heun stage on the Christoffels of g_t at both ends of the
/// step. Time part: d_t U = g^{-1} h U. Result is re-orthonormalized
/// against g_{t+dt} at x + dx.
inline Frame transport_step(const EvolvingModel& model, const Frame& frame, const Point& x, const Vec& dx, double t,
                            double dt) {
    Point y = x;
    for (int i = 0; i < model.dim(); ++i) y.coords[static_cast<std::size_t>(i)] += dx(i);

    const Mat& U = frame.columns;
    const Christoffel gx = model.christoffel(t, x);
    const Mat k1 = connection_increment(gx, dx, U);
    const Mat stage = U + k1;
    const Christoffel gy = model.christoffel(t, y);
    const Mat k2 = connection_increment(gy, dx, stage);
    Mat next = U + 0.5 * (k1 + k2);

    if (dt > 0.0) {
        const LocalGeometry geo = model.local(t + 0.5 * dt, y);
        next += dt * geo.g_inv * geo.h * next;
        next = orthonormalize(next, model.metric_at(t + dt, y));
    } else {
        next = orthonormalize(next, model.metric_at(t, y));
    }
    return {next, t + dt};
}

/// Ric - 1/2 d_t g + Hess phi expressed in the frame: A = U^T T U.
inline Mat pulled_back_tensor(const LocalGeometry& geo, const Mat& columns) {
    const Mat tensor = geo.ricci + geo.h + geo.hess_phi;
    return columns.transpose() * tensor * columns;
}

inline Mat pulled_back_tensor(const EvolvingModel& model, const Frame& frame, const Point& x, double t) {
    return pulled_back_tensor(model.local(t, x), frame.columns);
}

/// One step of dQ/dt = -A Q given A at the start (a_now) and end (a_next).
inline DampingMatrix q_step(const DampingMatrix& q, const Mat& a_now, const Mat& a_next, double dt,
                            Integrator integrator = Integrator::Heun) {
    const Mat k1 = -a_now * q.Q;
    if (integrator == Integrator::Euler) return {q.Q + dt * k1, q.s};
    const Mat predictor = q.Q + dt * k1;
    const Mat k2 = -a_next * predictor;
    return {q.Q + 0.5 * dt * (k1 + k2), q.s};
}

/// Explicit Euler step using the tensor at the current frame and point.
inline DampingMatrix q_step(const EvolvingModel& model, const DampingMatrix& q, const Frame& frame, const Point& x,
                            double t, double dt) {
    const Mat a = pulled_back_tensor(model, frame, x, t);
    return q_step(q, a, a, dt, Integrator::Euler);
}

}  // namespace evoheat
