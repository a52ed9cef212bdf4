#pragma once

// Named test functions shared by estimators, oracle and verifier.
//
// Ids:
//   const:c                     constant c
//   cos:k[:amp[:offset]]        amp cos(k a) + offset, a = theta (circle) or
//                               polar angle (sphere; equals amp T_k(z) + offset)
//   sin:k[:amp[:offset]]        circle: amp sin(k theta) + offset;
//                               sphere: amp Re((x + i y)^k) + offset (sectoral harmonic)
//   bump:center:width[:offset]  exp((cos(a - center) - 1) / width^2) + offset on circles,
//                               exp((<p, n_center> - 1) / width^2) + offset on the sphere
//   floor:<id>                  <id> + 1e-3

#include "evoheat/errors.hpp"
#include "evoheat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace evoheat {

inline constexpr double kFloorDelta = 1e-3;

/// Value and chart differential of a test function at a point.
struct FunctionJet {
    double value = 0.0;
    Vec differential;  // covector in chart coordinates
};

class TestFunction {
public:
    enum class Kind { Constant, Cos, Sin, Bump, Floor };

    static TestFunction parse(const std::string& id) {
        TestFunction f;
        f.id_ = id;
        const auto colon = id.find(':');
        const std::string head = id.substr(0, colon);
        const std::string rest = colon == std::string::npos ? "" : id.substr(colon + 1);
        if (head == "floor") {
            if (rest.empty()) throw ConfigError("floor needs an inner function id");
            f.kind_ = Kind::Floor;
            f.inner_ = std::make_shared<TestFunction>(parse(rest));
            return f;
        }
        const std::vector<double> args = numbers(rest, id);
        auto arg = [&](std::size_t i, double fallback) { return i < args.size() ? args[i] : fallback; };
        if (head == "const") {
            if (args.size() != 1) throw ConfigError("const takes one argument: " + id);
            f.kind_ = Kind::Constant;
            f.offset_ = args[0];
        } else if (head == "cos" || head == "sin") {
            if (args.empty() || args.size() > 3) throw ConfigError("expected " + head + ":k[:amp[:offset]]: " + id);
            if (args[0] < 0 || std::floor(args[0]) != args[0]) throw ConfigError("mode must be a nonnegative integer");
            f.kind_ = head == "cos" ? Kind::Cos : Kind::Sin;
            f.mode_ = static_cast<int>(args[0]);
            f.amp_ = arg(1, 1.0);
            f.offset_ = arg(2, 0.0);
        } else if (head == "bump") {
            if (args.size() < 2 || args.size() > 3) throw ConfigError("expected bump:center:width[:offset]: " + id);
            if (!(args[1] > 0.0)) throw ConfigError("bump width must be positive");
            f.kind_ = Kind::Bump;
            f.center_ = args[0];
            f.width_ = args[1];
            f.offset_ = arg(2, 0.0);
        } else {
            throw ConfigError("unknown test function: " + id);
        }
        return f;
    }

    [[nodiscard]] const std::string& id() const { return id_; }
    [[nodiscard]] Kind kind() const { return kind_; }

    /// Depends on the sphere point only through the polar angle about +z.
    [[nodiscard]] bool is_zonal() const {
        switch (kind_) {
            case Kind::Constant:
            case Kind::Cos: return true;
            case Kind::Sin: return mode_ == 0 || amp_ == 0.0;
            case Kind::Bump: return center_ == 0.0;
            case Kind::Floor: return inner_->is_zonal();
        }
        return false;
    }

    /// The 1-D reference solver can represent this function on the model.
    [[nodiscard]] bool oracle_representable(const EvolvingModel& model) const {
        return !model.is_sphere() || is_zonal();
    }

    /// Value and derivative as a function of the standard angle (theta or
    /// polar angle). Valid on circles, and on the sphere for zonal functions.
    [[nodiscard]] std::pair<double, double> profile(double a, bool sphere) const {
        switch (kind_) {
            case Kind::Constant: return {offset_, 0.0};
            case Kind::Cos: return {amp_ * std::cos(mode_ * a) + offset_, -amp_ * mode_ * std::sin(mode_ * a)};
            case Kind::Sin:
                if (sphere) return {amp_ * (mode_ == 0 ? 1.0 : 0.0) + offset_, 0.0};
                return {amp_ * std::sin(mode_ * a) + offset_, amp_ * mode_ * std::cos(mode_ * a)};
            case Kind::Bump: {
                const double w2 = width_ * width_;
                const double e = std::exp((std::cos(a - center_) - 1.0) / w2);
                return {e + offset_, -e * std::sin(a - center_) / w2};
            }
            case Kind::Floor: {
                auto [v, d] = inner_->profile(a, sphere);
                return {v + kFloorDelta, d};
            }
        }
        return {0.0, 0.0};
    }

    [[nodiscard]] double value(const EvolvingModel& model, const Point& x) const { return jet(model, x).value; }

    [[nodiscard]] FunctionJet jet(const EvolvingModel& model, const Point& x) const {
        FunctionJet out;
        if (!model.is_sphere()) {
            auto [v, d] = profile(x.coords[0], false);
            out.value = v;
            out.differential = Vec::Constant(1, d);
            return out;
        }
        const Eigen::Vector3d p = model.embed(x);
        Eigen::Vector3d grad;
        out.value = ambient(p, grad);
        const Eigen::Matrix<double, 3, 2> jac = model.embedding_jacobian(x);
        out.differential = Vec(jac.transpose() * grad);
        return out;
    }

    /// Sphere value and ambient gradient (of the extension used for the chart differential).
    double ambient(const Eigen::Vector3d& p, Eigen::Vector3d& grad) const {
        switch (kind_) {
            case Kind::Constant: grad.setZero(); return offset_;
            case Kind::Cos: {
                // T_k(z) and T_k'(z) = k U_{k-1}(z) by recurrence.
                const double z = std::clamp(p.z(), -1.0, 1.0);
                double t0 = 1.0, t1 = z, u0 = 1.0, u1 = 2.0 * z;
                double tk = mode_ == 0 ? 1.0 : z;
                double ukm1 = mode_ == 0 ? 0.0 : 1.0;
                for (int k = 2; k <= mode_; ++k) {
                    const double t2 = 2.0 * z * t1 - t0;
                    t0 = t1;
                    t1 = t2;
                    tk = t2;
                    ukm1 = u1;
                    const double u2 = 2.0 * z * u1 - u0;
                    u0 = u1;
                    u1 = u2;
                }
                grad = Eigen::Vector3d(0.0, 0.0, amp_ * mode_ * ukm1);
                return amp_ * tk + offset_;
            }
            case Kind::Sin: {
                // Re((x + i y)^k) and its gradient k (x + i y)^{k-1} (1, i).
                std::complex<double> w(p.x(), p.y());
                std::complex<double> wk = std::pow(w, mode_);
                std::complex<double> wkm1 = mode_ == 0 ? 0.0 : std::pow(w, mode_ - 1);
                grad = Eigen::Vector3d(amp_ * mode_ * wkm1.real(), -amp_ * mode_ * wkm1.imag(), 0.0);
                return amp_ * wk.real() + offset_;
            }
            case Kind::Bump: {
                const Eigen::Vector3d n(std::sin(center_), 0.0, std::cos(center_));
                const double w2 = width_ * width_;
                const double e = std::exp((p.dot(n) - 1.0) / w2);
                grad = e / w2 * n;
                return e + offset_;
            }
            case Kind::Floor: return inner_->ambient(p, grad) + kFloorDelta;
        }
        grad.setZero();
        return 0.0;
    }

    /// Closed-form decay for sectoral harmonics on the shrinking sphere with zero
    /// potential: P_{s,t} f = offset + (f - offset) ((1-2t)/(1-2s))^{k(k+1)/2}.
    [[nodiscard]] bool is_sphere_eigenfunction() const { return kind_ == Kind::Sin || kind_ == Kind::Constant; }
    [[nodiscard]] int mode() const { return mode_; }
    [[nodiscard]] double offset() const { return offset_; }

private:
    static std::vector<double> numbers(const std::string& rest, const std::string& id) {
        std::vector<double> out;
        if (rest.empty()) return out;
        std::stringstream ss(rest);
        std::string tok;
        while (std::getline(ss, tok, ':')) {
            try {
                std::size_t used = 0;
                out.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ConfigError("bad numeric argument '" + tok + "' in " + id);
            }
        }
        return out;
    }

    std::string id_;
    Kind kind_ = Kind::Constant;
    int mode_ = 0;
    double amp_ = 1.0;
    double offset_ = 0.0;
    double center_ = 0.0;
    double width_ = 1.0;
    std::shared_ptr<const TestFunction> inner_;
};

}  // namespace evoheat
