#pragma once

#include <Eigen/Dense>

#include <array>

namespace evoheat {

// Model manifolds have dimension 1 or 2; fixed maximum sizes keep all
// per-step linear algebra on the stack.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, 2>;

/// Christoffel symbols Gamma^k_{ij} of a chart, k = upper index.
struct Christoffel {
    int dim = 1;
    std::array<double, 8> values{};

    double& operator()(int k, int i, int j) { return values[static_cast<std::size_t>(4 * k + 2 * i + j)]; }
    double operator()(int k, int i, int j) const { return values[static_cast<std::size_t>(4 * k + 2 * i + j)]; }

    /// Contraction Gamma^k_{ij} a^i b^j.
    [[nodiscard]] Vec contract(const Vec& a, const Vec& b) const {
        Vec out = Vec::Zero(dim);
        for (int k = 0; k < dim; ++k)
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) out(k) += (*this)(k, i, j) * a(i) * b(j);
        return out;
    }
};

/// Smallest eigenvalue of the endomorphism g^{-1} T for symmetric T, g.
inline double smallest_relative_eigenvalue(const Mat& tensor, const Mat& metric) {
    if (tensor.rows() == 1) return tensor(0, 0) / metric(0, 0);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> solver(
        Eigen::Matrix2d(tensor), Eigen::Matrix2d(metric), Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

}  // namespace evoheat
