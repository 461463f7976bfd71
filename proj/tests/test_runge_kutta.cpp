#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fastcq/runge_kutta.hpp"

using fastcq::cplx;
using fastcq::MethodName;

namespace {

const MethodName kAll[] = {MethodName::BackwardEuler, MethodName::RadauIIA2, MethodName::RadauIIA3,
                           MethodName::LobattoIIIC2};

}  // namespace

TEST(RungeKutta, TableauxAreConsistent) {
    for (auto name : kAll) {
        const auto m = fastcq::builtin_method(name);
        EXPECT_NO_THROW(fastcq::validate_method(m));
        EXPECT_NEAR(m.b.sum(), 1.0, 1e-14) << m.name;
        // row sums of A reproduce c
        for (int i = 0; i < m.stages(); ++i) EXPECT_NEAR(m.A.row(i).sum(), m.c(i), 1e-14) << m.name;
    }
}

TEST(RungeKutta, ClosedFormStabilityFunctions) {
    const auto be = fastcq::builtin_method(MethodName::BackwardEuler);
    const auto r2 = fastcq::builtin_method(MethodName::RadauIIA2);
    for (cplx z : {cplx(-0.3, 0.2), cplx(-5.0, -7.0), cplx(0.1, 3.0), cplx(-100.0, 0.0)}) {
        EXPECT_LT(std::abs(fastcq::stability_r(be, z) - 1.0 / (1.0 - z)), 1e-14);
        const cplx want = (1.0 + z / 3.0) / (1.0 - 2.0 * z / 3.0 + z * z / 6.0);
        EXPECT_LT(std::abs(fastcq::stability_r(r2, z) - want), 1e-13 * (1.0 + std::abs(want)));
    }
}

TEST(RungeKutta, StabilityApproximatesExponentialToOrder) {
    for (auto name : kAll) {
        const auto m = fastcq::builtin_method(name);
        const cplx z1(0.01, 0.02);
        const cplx z2 = 0.5 * z1;
        const double e1 = std::abs(fastcq::stability_r(m, z1) - std::exp(z1));
        const double e2 = std::abs(fastcq::stability_r(m, z2) - std::exp(z2));
        if (e2 < 1e-15) continue;  // order too high to resolve in double precision
        EXPECT_NEAR(std::log2(e1 / e2), m.order + 1, 0.15) << m.name;
    }
}

TEST(RungeKutta, RelationsBetweenSymbols) {
    for (auto name : kAll) {
        const auto m = fastcq::builtin_method(name);
        const cplx z(-1.3, 0.8);
        const fastcq::Resolvent res(m, z);
        // r(z) = 1 + z q(z) 1 and v_s = r for stiffly accurate methods
        EXPECT_LT(std::abs(1.0 + z * res.q().sum() - res.r()), 1e-13) << m.name;
        EXPECT_LT(std::abs(fastcq::e_n_row(m, 3, z)(0) - std::pow(res.r(), 3) * res.q()(0)), 1e-14);
    }
}

TEST(RungeKutta, SymbolDeltaMatchesBackwardDifference) {
    const auto be = fastcq::builtin_method(MethodName::BackwardEuler);
    const cplx zeta(0.3, 0.4);
    EXPECT_LT(std::abs(fastcq::symbol_delta(be, zeta)(0, 0) - (1.0 - zeta)), 1e-15);
    EXPECT_THROW(fastcq::symbol_delta(be, cplx(1.0, 0.0)), fastcq::DomainError);
}

TEST(RungeKutta, ParseNames) {
    EXPECT_EQ(fastcq::parse_method_name("be"), MethodName::BackwardEuler);
    EXPECT_EQ(fastcq::parse_method_name("RadauIIA2"), MethodName::RadauIIA2);
    EXPECT_EQ(fastcq::parse_method_name("radau3"), MethodName::RadauIIA3);
    EXPECT_THROW(fastcq::parse_method_name("gauss2"), fastcq::DomainError);
}

TEST(RungeKutta, RejectsExplicitTableau) {
    fastcq::RKMethod m = fastcq::builtin_method(MethodName::BackwardEuler);
    m.A(0, 0) = 0.0;
    EXPECT_THROW(fastcq::validate_method(m), fastcq::CertificationError);
}

TEST(RungeKutta, RejectsNonStifflyAccurate) {
    // implicit midpoint: A-stable but b^T A^{-1} != e_s^T and c_s = 1/2
    fastcq::RKMethod m = fastcq::builtin_method(MethodName::BackwardEuler);
    m.name = "midpoint";
    m.A(0, 0) = 0.5;
    m.c(0) = 0.5;
    EXPECT_THROW(fastcq::validate_method(m), fastcq::CertificationError);
}

TEST(RungeKutta, PowPolarHandlesExtremes) {
    EXPECT_EQ(fastcq::pow_polar(cplx(0.5, 0.0), 5000), cplx(0.0, 0.0));
    EXPECT_THROW(fastcq::pow_polar(cplx(2.0, 0.0), 5000), fastcq::OverflowError);
    EXPECT_LT(std::abs(fastcq::pow_polar(cplx(0.6, 0.8), 7) - std::pow(cplx(0.6, 0.8), 7)), 1e-14);
}

TEST(RungeKuttaConstants, KnownValues) {
    const auto be = fastcq::builtin_method(MethodName::BackwardEuler);
    const auto mc = fastcq::method_constants(be, 0.01);
    // |z r(z)| = |z/(1-z)| -> 1 as |z| -> inf on the left half plane
    EXPECT_NEAR(mc.C_A, 1.0, 1e-9);
    EXPECT_GE(mc.nu, 1.0);
    EXPECT_GE(mc.C_q, 1.0);
}

// gamma in (0, 1] and |r(z)| <= exp(gamma(xi) Re z) on the strip -xi <= Re z < 0
TEST(RungeKuttaConstants, GammaBoundOnRandomStripSamples) {
    std::mt19937_64 rng(11);
    for (auto name : kAll) {
        const auto m = fastcq::builtin_method(name);
        const auto mc = fastcq::method_constants(m, 0.01);
        for (double g : mc.gamma_values) {
            EXPECT_GT(g, 0.0);
            EXPECT_LE(g, 1.0);
        }
        for (std::size_t k = 1; k < mc.gamma_values.size(); ++k) {
            EXPECT_LE(mc.gamma_values[k], mc.gamma_values[k - 1]);
        }
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        int violations = 0;
        for (int k = 0; k < 10000; ++k) {
            const double xi = std::pow(10.0, -4.0 + 6.0 * u01(rng));
            const double x = -xi * (1e-6 + (1.0 - 1e-6) * u01(rng));
            const double y = (u01(rng) - 0.5) * 2.0 * std::pow(10.0, -3.0 + 6.0 * u01(rng));
            const double bound = std::exp(mc.gamma(xi) * x);
            if (std::abs(fastcq::stability_r(m, {x, y})) > bound * (1.0 + 1e-12)) ++violations;
        }
        EXPECT_EQ(violations, 0) << m.name;
    }
}

TEST(RungeKuttaConstants, GammaLookupOutsideGridThrows) {
    const auto m = fastcq::builtin_method(MethodName::RadauIIA2);
    const auto mc = fastcq::method_constants(m, 0.01);
    EXPECT_THROW((void)mc.gamma(1e6), fastcq::CertificationError);
}

TEST(RungeKuttaConstants, StripTooWideIsRejected) {
    const auto m = fastcq::builtin_method(MethodName::BackwardEuler);
    EXPECT_THROW(fastcq::certify_nu_Cq(m, 0.6), fastcq::CertificationError);
}
