#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "fastcq/cq_reference.hpp"

using fastcq::cplx;
using fastcq::MethodName;
using fastcq::StageVector;

// For K(z) = 1/(z - a) the CQ convolution with data g is exactly the RK
// solution of y' = a y + g, y(0) = 0.
TEST(CqReference, ResolventKernelReproducesRungeKutta) {
    const cplx a(-0.7, 1.3);
    const double h = 0.05;
    const std::size_t N = 200;
    for (auto name : {MethodName::BackwardEuler, MethodName::RadauIIA2, MethodName::RadauIIA3}) {
        const auto m = fastcq::builtin_method(name);
        auto table = fastcq::weights_fft([a](cplx z) { return 1.0 / (z - a); }, m, h, N, fastcq::default_rho(N));
        std::vector<StageVector> data;
        for (std::size_t n = 0; n < N; ++n) {
            StageVector g(m.stages());
            for (int i = 0; i < m.stages(); ++i) g(i) = std::cos((n + m.c(i)) * h) + fastcq::I_unit * ((n + m.c(i)) * h);
            data.push_back(g);
        }
        const auto u = fastcq::convolve_direct(table, data);
        cplx y = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            y = fastcq::discrete_ode_step(m, a, y, data[n], h).y;
            EXPECT_LT(std::abs(u[n] - y), 1e-9 * std::max(1.0, std::abs(y))) << m.name << " n=" << n;
        }
    }
}

TEST(CqReference, FullMatricesContainLastRow) {
    const auto m = fastcq::builtin_method(MethodName::RadauIIA2);
    const auto tab = fastcq::weights_fft(fastcq::KernelSpec{1, 1.0}, m, 0.1, 64, fastcq::default_rho(64), 10);
    ASSERT_EQ(tab.full.size(), 10u);
    ASSERT_EQ(tab.size(), 65u);
    for (std::size_t n = 0; n < 10; ++n) {
        EXPECT_LT((tab.full[n].row(1) - tab.omega[n]).norm(), 1e-15);
    }
}

// Delta(0) = A^{-1}, so for backward Euler W_0 = K(1/h).
TEST(CqReference, WeightZeroMatchesSymbolAtOrigin) {
    const auto m = fastcq::builtin_method(MethodName::BackwardEuler);
    const double h = 0.01;
    const auto tab = fastcq::weights_fft(fastcq::KernelSpec{1, 1.0}, m, h, 128, fastcq::default_rho(128));
    const cplx want = fastcq::transfer_K(fastcq::KernelSpec{1, 1.0}, cplx(1.0 / h, 0.0));
    EXPECT_LT(std::abs(tab.omega[0](0) - want), 1e-12 * std::abs(want));
}

TEST(CqReference, ConvolutionIsLinear) {
    const auto m = fastcq::builtin_method(MethodName::RadauIIA2);
    const auto tab = fastcq::weights_fft(fastcq::KernelSpec{1, 2.0}, m, 0.1, 50, fastcq::default_rho(50));
    std::mt19937 rng(3);
    std::normal_distribution<double> nd;
    std::vector<StageVector> f(50, StageVector(2)), g(50, StageVector(2)), fg(50, StageVector(2));
    const cplx alpha(0.3, -1.1);
    for (int n = 0; n < 50; ++n) {
        for (int i = 0; i < 2; ++i) {
            f[n](i) = cplx(nd(rng), nd(rng));
            g[n](i) = cplx(nd(rng), nd(rng));
            fg[n](i) = f[n](i) + alpha * g[n](i);
        }
    }
    const auto uf = fastcq::convolve_direct(tab, f);
    const auto ug = fastcq::convolve_direct(tab, g);
    const auto ufg = fastcq::convolve_direct(tab, fg);
    for (int n = 0; n < 50; ++n) EXPECT_LT(std::abs(ufg[n] - uf[n] - alpha * ug[n]), 1e-12);
}

TEST(CqReference, Errors) {
    const auto m = fastcq::builtin_method(MethodName::BackwardEuler);
    EXPECT_THROW(fastcq::weights_fft(fastcq::KernelSpec{1, 1.0}, m, 0.1, 0, 0.5), fastcq::DomainError);
    EXPECT_THROW(fastcq::weights_fft(fastcq::KernelSpec{1, 1.0}, m, 0.1, 10, 1.0), fastcq::DomainError);
    const auto tab = fastcq::weights_fft(fastcq::KernelSpec{1, 1.0}, m, 0.1, 4, fastcq::default_rho(4));
    std::vector<StageVector> data(6, StageVector::Ones(1));
    EXPECT_THROW(fastcq::convolve_direct(tab, data), fastcq::LengthError);
}

TEST(CqReference, CsvHasOneRowPerEntry) {
    const auto m = fastcq::builtin_method(MethodName::RadauIIA2);
    const auto tab = fastcq::weights_fft(fastcq::KernelSpec{1, 1.0}, m, 0.1, 8, fastcq::default_rho(8));
    std::ostringstream os;
    fastcq::write_weight_csv(tab, os);
    const std::string text = os.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 9 * 2);
    EXPECT_EQ(text.rfind("n,i,re,im\n", 0), 0u);
}
