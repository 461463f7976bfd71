#include <gtest/gtest.h>

#include <cmath>

#include "fastcq/gauss.hpp"

namespace {

double integrate(const fastcq::GaussRule& rule, int k) {
    double s = 0.0;
    for (int i = 0; i < rule.size(); ++i) s += rule.weights[i] * std::pow(1.0 + rule.nodes[i], k);
    return s;
}

}  // namespace

// (1 + x)^k is exact up to k = 2Q - 1 for both rules
TEST(Gauss, LegendreExactness) {
    for (int Q : {1, 2, 5, 12, 30}) {
        const auto rule = fastcq::gauss_legendre(Q);
        for (int k = 0; k <= 2 * Q - 1; ++k) {
            const double want = std::pow(2.0, k + 1) / (k + 1);
            EXPECT_NEAR(integrate(rule, k) / want, 1.0, 1e-12) << "Q=" << Q << " k=" << k;
        }
    }
}

TEST(Gauss, JacobiHalfExactness) {
    for (int Q : {1, 2, 5, 12, 30}) {
        const auto rule = fastcq::gauss_jacobi_half(Q);
        for (int k = 0; k <= 2 * Q - 1; ++k) {
            const double want = std::pow(2.0, k + 0.5) / (k + 0.5);
            EXPECT_NEAR(integrate(rule, k) / want, 1.0, 1e-12) << "Q=" << Q << " k=" << k;
        }
    }
}

TEST(Gauss, NotExactBeyondDegree) {
    const auto rule = fastcq::gauss_legendre(4);
    const double want = std::pow(2.0, 9) / 9.0;
    EXPECT_GT(std::abs(integrate(rule, 8) / want - 1.0), 1e-6);
}

TEST(Gauss, NodesOrderedAndInside) {
    for (const auto& rule : {fastcq::gauss_legendre(17), fastcq::gauss_jacobi_half(17)}) {
        for (int i = 0; i < rule.size(); ++i) {
            EXPECT_GT(rule.nodes[i], -1.0);
            EXPECT_LT(rule.nodes[i], 1.0);
            EXPECT_GT(rule.weights[i], 0.0);
            if (i > 0) {
                EXPECT_LT(rule.nodes[i - 1], rule.nodes[i]);
            }
        }
    }
}

TEST(Gauss, LegendreSymmetric) {
    const auto rule = fastcq::gauss_legendre(9);
    for (int i = 0; i < 9; ++i) {
        EXPECT_EQ(rule.nodes[i], -rule.nodes[8 - i]);
        EXPECT_EQ(rule.weights[i], rule.weights[8 - i]);
    }
}

TEST(Gauss, RejectsEmptyRule) { EXPECT_THROW(fastcq::gauss_legendre(0), fastcq::DomainError); }
