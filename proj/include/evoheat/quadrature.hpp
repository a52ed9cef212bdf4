#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace evoheat::quad {

/// Adaptive Gauss-Kronrod integral of f over [a, b]; returns 0 for a == b.
/// A single 31-point pass is accepted when its error estimate is already at
/// the rule's absolute roundoff floor, which keeps short intervals from
/// recursing to max depth.
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-12, unsigned max_depth = 18) {
    using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;
    if (a == b) return 0.0;
    double err = 0.0, l1 = 0.0;
    const double single = Rule::integrate(f, a, b, 0, tol, &err, &l1);
    if (err <= std::max(tol * l1, 8.0 * std::numeric_limits<double>::epsilon())) return single;
    return Rule::integrate(std::forward<F>(f), a, b, max_depth, tol, &err);
}

/// Fixed 15-point Gauss-Legendre rule, used on short panels.
template <class F>
double gauss15(F&& f, double a, double b) {
    if (a == b) return 0.0;
    return boost::math::quadrature::gauss<double, 15>::integrate(std::forward<F>(f), a, b);
}

/// Running integral C(x) = int_{lo}^{x} f on a panelled interval.
/// Panel totals are tabulated once; C(x) adds one Gauss panel evaluation,
/// so differences C(b) - C(a) cost O(1) integrand calls.
class CumulativeIntegral {
public:
    CumulativeIntegral() = default;

    CumulativeIntegral(std::function<double(double)> f, std::vector<double> knots)
        : f_(std::move(f)), knots_(std::move(knots)), totals_(knots_.size(), 0.0) {
        for (std::size_t i = 1; i < knots_.size(); ++i)
            totals_[i] = totals_[i - 1] + gauss15(f_, knots_[i - 1], knots_[i]);
    }

    /// Uniform panels over [lo, hi].
    static CumulativeIntegral uniform(std::function<double(double)> f, double lo, double hi, std::size_t panels) {
        std::vector<double> knots(panels + 1);
        for (std::size_t i = 0; i <= panels; ++i)
            knots[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(panels);
        return CumulativeIntegral(std::move(f), std::move(knots));
    }

    [[nodiscard]] const std::vector<double>& knots() const { return knots_; }
    [[nodiscard]] double lo() const { return knots_.front(); }
    [[nodiscard]] double hi() const { return knots_.back(); }

    [[nodiscard]] double at(double x) const {
        if (x <= knots_.front()) return -gauss15(f_, x, knots_.front());
        if (x >= knots_.back()) return totals_.back() + gauss15(f_, knots_.back(), x);
        auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
        const auto i = static_cast<std::size_t>(std::distance(knots_.begin(), it)) - 1;
        return totals_[i] + gauss15(f_, knots_[i], x);
    }

    /// int_a^b f.
    [[nodiscard]] double between(double a, double b) const { return at(b) - at(a); }

private:
    std::function<double(double)> f_;
    std::vector<double> knots_;
    std::vector<double> totals_;
};

}  // namespace evoheat::quad
