#pragma once

// Gauss-Legendre and Gauss-Jacobi (alpha = 0, beta = -1/2) rules on [-1, 1]
// computed with the Golub-Welsch eigenvalue method.

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <vector>

#include "fastcq/errors.hpp"

namespace fastcq {

enum class GaussKind { Legendre, JacobiHalf };

struct GaussRule {
    GaussKind kind = GaussKind::Legendre;
    std::vector<double> nodes;    // increasing, in (-1, 1)
    std::vector<double> weights;  // positive

    [[nodiscard]] int size() const { return static_cast<int>(nodes.size()); }
};

namespace detail {

// Three-term recurrence of the monic Jacobi polynomials for the weight
// (1-x)^alpha (1+x)^beta: diagonal a_n and off-diagonal sqrt(b_n).
inline GaussRule golub_welsch_jacobi(int Q, double alpha, double beta, GaussKind kind) {
    if (Q <= 0) throw DomainError("Gauss rule needs Q >= 1");
    const double ab = alpha + beta;
    Eigen::VectorXd diag(Q);
    Eigen::VectorXd sub(std::max(Q - 1, 0));
    for (int n = 0; n < Q; ++n) {
        if (n == 0) {
            diag(n) = (beta - alpha) / (ab + 2.0);
        } else {
            const double k = 2.0 * n + ab;
            diag(n) = (beta * beta - alpha * alpha) / (k * (k + 2.0));
        }
    }
    for (int n = 1; n < Q; ++n) {
        const double k = 2.0 * n + ab;
        const double num = 4.0 * n * (n + alpha) * (n + beta) * (n + ab);
        const double den = k * k * (k + 1.0) * (k - 1.0);
        sub(n - 1) = std::sqrt(num / den);
    }
    const double mu0 = std::pow(2.0, ab + 1.0) * std::tgamma(alpha + 1.0) * std::tgamma(beta + 1.0) /
                       std::tgamma(ab + 2.0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
        throw Error("Golub-Welsch eigenvalue solve failed");
    }
    GaussRule rule;
    rule.kind = kind;
    rule.nodes.resize(Q);
    rule.weights.resize(Q);
    for (int i = 0; i < Q; ++i) {
        rule.nodes[i] = solver.eigenvalues()(i);
        const double v0 = solver.eigenvectors()(0, i);
        rule.weights[i] = mu0 * v0 * v0;
    }
    return rule;
}

}  // namespace detail

inline GaussRule gauss_legendre(int Q) {
    auto rule = detail::golub_welsch_jacobi(Q, 0.0, 0.0, GaussKind::Legendre);
    // the rule is symmetric; remove the eigen-solver asymmetry
    for (int i = 0; i < Q / 2; ++i) {
        const double x = 0.5 * (rule.nodes[Q - 1 - i] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[Q - 1 - i] + rule.weights[i]);
        rule.nodes[i] = -x;
        rule.nodes[Q - 1 - i] = x;
        rule.weights[i] = rule.weights[Q - 1 - i] = w;
    }
    if (Q % 2 == 1) rule.nodes[Q / 2] = 0.0;
    return rule;
}

/// Gauss rule for the weight (1 + x)^{-1/2} on [-1, 1].
inline GaussRule gauss_jacobi_half(int Q) {
    return detail::golub_welsch_jacobi(Q, 0.0, -0.5, GaussKind::JacobiHalf);
}

}  // namespace fastcq
