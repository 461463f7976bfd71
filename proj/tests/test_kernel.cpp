#include <gtest/gtest.h>

#include <boost/math/quadrature/sinh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "fastcq/kernel.hpp"

using fastcq::cplx;
using fastcq::CutSide;
using fastcq::KernelSpec;

TEST(Kernel, JumpIdentityAllDimensions) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int D = 1; D <= 3; ++D) {
        for (int k = 0; k < 500; ++k) {
            const double lambda = std::pow(10.0, -4.0 + 6.0 * u01(rng));
            const double d = (D == 1 && k % 5 == 0) ? 0.0 : 0.05 + 5.0 * u01(rng);
            const KernelSpec spec{D, d};
            const cplx G = fastcq::jump_G(spec, lambda);
            const cplx diff = fastcq::transfer_on_cut(spec, lambda, CutSide::below) -
                              fastcq::transfer_on_cut(spec, lambda, CutSide::above);
            EXPECT_LT(std::abs(G - diff), 1e-12 * std::max(1.0, std::abs(G))) << "D=" << D << " lambda=" << lambda;
        }
    }
}

TEST(Kernel, CutValuesAreLimitsOfTransfer) {
    for (int D = 1; D <= 3; ++D) {
        const KernelSpec spec{D, 1.3};
        for (double lambda : {0.01, 0.7, 12.0}) {
            const double eps = 1e-10 * lambda;
            const cplx up = fastcq::transfer_K(spec, cplx(-lambda, eps));
            const cplx down = fastcq::transfer_K(spec, cplx(-lambda, -eps));
            EXPECT_LT(std::abs(up - fastcq::transfer_on_cut(spec, lambda, CutSide::above)), 1e-7 * std::abs(up));
            EXPECT_LT(std::abs(down - fastcq::transfer_on_cut(spec, lambda, CutSide::below)), 1e-7 * std::abs(down));
        }
    }
}

TEST(Kernel, TransferRejectsCut) {
    EXPECT_THROW(fastcq::transfer_K(KernelSpec{1, 1.0}, cplx(-2.0, 0.0)), fastcq::DomainError);
    EXPECT_THROW(fastcq::transfer_K(KernelSpec{2, 0.0}, cplx(1.0, 1.0)), fastcq::DomainError);
    EXPECT_THROW(fastcq::green_k(KernelSpec{1, 1.0}, 0.0), fastcq::DomainError);
}

TEST(Kernel, ScaledJumpMatches) {
    for (double lambda : {1e-3, 0.5, 4.0}) {
        const cplx G = fastcq::jump_G(KernelSpec{1, 2.0}, lambda);
        EXPECT_LT(std::abs(std::sqrt(lambda) * G - fastcq::jump_G_scaled_1d(2.0, lambda)), 1e-13 * std::abs(G));
    }
}

// Derivative of the time-integrated kernel reproduces k(t, d)
TEST(Kernel, TimeIntegratedKernelDerivative) {
    for (double d : {0.0, 0.5, 2.0, 6.0}) {
        for (double t : {0.3, 1.0, 7.5, 40.0}) {
            const double dt = 1e-4 * t;
            const cplx fd = (fastcq::time_integrated_kernel(d, t + dt) - fastcq::time_integrated_kernel(d, t - dt)) /
                            (2.0 * dt);
            const cplx k = fastcq::green_k(KernelSpec{1, d}, t);
            EXPECT_LT(std::abs(fd - k), 1e-6 * std::max(1.0, std::abs(k))) << "d=" << d << " t=" << t;
        }
    }
}

TEST(Kernel, TimeIntegratedKernelVanishesAtZero) {
    for (double d : {0.0, 1.0, 6.0}) EXPECT_LT(std::abs(fastcq::time_integrated_kernel(d, 1e-12)), 1e-5);
}

// Oracle: Fourier representation (1/2pi) int e^{ikX - ik^2 t} 2 mu / (mu^2 + k^2) dk
// on the rotated line k = e^{-i pi/4} s, where the integrand decays like e^{-s^2 t}.
TEST(Kernel, FreeEvolutionAgainstQuadrature) {
    const cplx rot = fastcq::cis(-std::numbers::pi / 4.0);
    boost::math::quadrature::sinh_sinh<double> integrator;
    for (double mu : {0.15, 0.3, 1.0}) {
        for (double t : {0.5, 2.0, 14.0}) {
            for (double X : {-6.0, 0.0, 0.7, 3.0}) {
                auto re = [&](double s) {
                    const cplx k = rot * s;
                    const cplx v = rot * std::exp(fastcq::I_unit * k * X - s * s * t) * 2.0 * mu / (mu * mu + k * k);
                    return v.real();
                };
                auto im = [&](double s) {
                    const cplx k = rot * s;
                    const cplx v = rot * std::exp(fastcq::I_unit * k * X - s * s * t) * 2.0 * mu / (mu * mu + k * k);
                    return v.imag();
                };
                const cplx want = cplx(integrator.integrate(re), integrator.integrate(im)) / (2.0 * std::numbers::pi);
                const cplx got = fastcq::free_evolution_exp(mu, 1.0, t, 1.0 + X);
                EXPECT_LT(std::abs(got - want), 1e-8) << "mu=" << mu << " t=" << t << " X=" << X;
            }
        }
    }
}

TEST(Kernel, FreeEvolutionShortTimeLimit) {
    for (double X : {-2.0, 0.3, 1.5}) {
        const cplx got = fastcq::free_evolution_exp(0.5, 0.0, 1e-9, X);
        EXPECT_LT(std::abs(got - std::exp(-0.5 * std::abs(X))), 1e-4);
    }
}
