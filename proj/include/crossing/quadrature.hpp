#pragma once

// Gauss rules by the Golub-Welsch eigenvalue method, and the increment-law
// rules built from them.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "crossing/errors.hpp"
#include "crossing/model.hpp"

namespace crossing {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;  ///< sum to the total mass of the weight function
};

namespace detail {

// Nodes and weights from the Jacobi matrix with diagonal a and off-diagonal
// b of the monic recurrence; mu0 is the total mass.
inline QuadratureRule golub_welsch(const std::vector<double>& a, const std::vector<double>& b, double mu0) {
    const auto n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        J(i, i) = a[i];
        if (i + 1 < n) J(i, i + 1) = J(i + 1, i) = b[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(J);
    if (solver.info() != Eigen::Success) throw NumericalRefusal("Golub-Welsch eigenproblem did not converge");
    QuadratureRule rule;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = solver.eigenvectors()(0, i);
        rule.nodes.push_back(solver.eigenvalues()(i));
        rule.weights.push_back(mu0 * v * v);
    }
    return rule;
}

}  // namespace detail

/// Probabilists' Gauss-Hermite: integrates against the standard normal
/// density (weights sum to 1).
inline QuadratureRule gauss_hermite(int n) {
    std::vector<double> a(n, 0.0), b(n > 0 ? n - 1 : 0);
    for (int i = 1; i < n; ++i) b[i - 1] = std::sqrt(static_cast<double>(i));
    return detail::golub_welsch(a, b, 1.0);
}

/// Gauss-Laguerre against e^{-x} on (0, inf).
inline QuadratureRule gauss_laguerre(int n) {
    std::vector<double> a(n), b(n > 0 ? n - 1 : 0);
    for (int i = 0; i < n; ++i) a[i] = 2.0 * i + 1.0;
    for (int i = 1; i < n; ++i) b[i - 1] = static_cast<double>(i);
    return detail::golub_welsch(a, b, 1.0);
}

/// Gauss-Legendre on [-1, 1] (weights sum to 2).
inline QuadratureRule gauss_legendre(int n) {
    std::vector<double> a(n, 0.0), b(n > 0 ? n - 1 : 0);
    for (int i = 1; i < n; ++i) b[i - 1] = i / std::sqrt(4.0 * i * i - 1.0);
    return detail::golub_welsch(a, b, 2.0);
}

/// Rule for E g(X) under an increment law, renormalized so the weights sum
/// to exactly 1.
inline QuadratureRule increment_rule(const IncrementDistribution& dist, int nodes = 64) {
    dist.require_non_lattice();
    QuadratureRule rule;
    switch (dist.kind()) {
        case DistributionKind::standard_normal:
            rule = gauss_hermite(nodes);
            break;
        case DistributionKind::centered_exponential:
            rule = gauss_laguerre(nodes);
            for (double& x : rule.nodes) x -= 1.0;
            break;
        case DistributionKind::uniform_symmetric:
            rule = gauss_legendre(nodes);
            for (double& x : rule.nodes) x *= std::numbers::sqrt3;
            for (double& w : rule.weights) w *= 0.5;
            break;
        case DistributionKind::gaussian_mixture: {
            const auto& p = dist.params();
            const auto h = gauss_hermite(nodes);
            const double w[2] = {p[0], 1.0 - p[0]}, mu[2] = {p[1], p[3]}, sd[2] = {p[2], p[4]};
            for (int c = 0; c < 2; ++c) {
                for (std::size_t i = 0; i < h.nodes.size(); ++i) {
                    rule.nodes.push_back(mu[c] + sd[c] * h.nodes[i]);
                    rule.weights.push_back(w[c] * h.weights[i]);
                }
            }
            break;
        }
        case DistributionKind::two_point:
            break;  // refused above
    }
    double total = 0.0;
    for (double w : rule.weights) total += w;
    for (double& w : rule.weights) w /= total;
    return rule;
}

}  // namespace crossing
