#pragma once

// Coefficient-list representations of model data. Polynomials in t and
// trigonometric polynomials in an angle with polynomial-in-t coefficients
// have exact derivatives, so no differentiation noise enters inequality
// margins.

#include <cmath>
#include <vector>

namespace evoheat {

class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> coefficients) : coeffs_(std::move(coefficients)) {}

    [[nodiscard]] const std::vector<double>& coefficients() const { return coeffs_; }
    [[nodiscard]] bool is_zero() const {
        for (double c : coeffs_)
            if (c != 0.0) return false;
        return true;
    }
    [[nodiscard]] bool is_constant() const {
        for (std::size_t i = 1; i < coeffs_.size(); ++i)
            if (coeffs_[i] != 0.0) return false;
        return true;
    }

    [[nodiscard]] double operator()(double t) const {
        double acc = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * t + *it;
        return acc;
    }

    [[nodiscard]] double derivative(double t) const {
        double acc = 0.0;
        for (std::size_t i = coeffs_.size(); i-- > 1;) acc = acc * t + static_cast<double>(i) * coeffs_[i];
        return acc;
    }

private:
    std::vector<double> coeffs_;
};

/// One harmonic a(t) cos(k x) + b(t) sin(k x).
struct TrigTerm {
    int mode = 0;
    Polynomial cos_coeff;
    Polynomial sin_coeff;
};

/// Value and the partial derivatives used by the geometry module.
struct TrigEval {
    double f = 0.0;
    double f_t = 0.0;
    double f_x = 0.0;
    double f_xx = 0.0;
    double f_tx = 0.0;
};

class TrigSeries {
public:
    TrigSeries() = default;
    explicit TrigSeries(std::vector<TrigTerm> terms) : terms_(std::move(terms)) {}

    [[nodiscard]] const std::vector<TrigTerm>& terms() const { return terms_; }

    [[nodiscard]] bool is_zero() const {
        for (const auto& term : terms_)
            if (!term.cos_coeff.is_zero() || !term.sin_coeff.is_zero()) return false;
        return true;
    }

    /// True when the series has no angular dependence.
    [[nodiscard]] bool is_spatially_constant() const {
        for (const auto& term : terms_)
            if (term.mode != 0 && (!term.cos_coeff.is_zero() || !term.sin_coeff.is_zero())) return false;
        return true;
    }

    /// True when the series does not depend on t.
    [[nodiscard]] bool is_static() const {
        for (const auto& term : terms_)
            if (!term.cos_coeff.is_constant() || !term.sin_coeff.is_constant()) return false;
        return true;
    }

    [[nodiscard]] TrigEval eval(double t, double x) const {
        TrigEval out;
        for (const auto& term : terms_) {
            const double k = term.mode;
            const double c = std::cos(k * x);
            const double s = std::sin(k * x);
            const double a = term.cos_coeff(t);
            const double b = term.sin_coeff(t);
            const double a_t = term.cos_coeff.derivative(t);
            const double b_t = term.sin_coeff.derivative(t);
            out.f += a * c + b * s;
            out.f_t += a_t * c + b_t * s;
            out.f_x += k * (b * c - a * s);
            out.f_xx += -k * k * (a * c + b * s);
            out.f_tx += k * (b_t * c - a_t * s);
        }
        return out;
    }

    [[nodiscard]] double value(double t, double x) const { return eval(t, x).f; }

private:
    std::vector<TrigTerm> terms_;
};

}  // namespace evoheat
