#include <gtest/gtest.h>

#include <random>

#include "fastcq/fast_conv.hpp"

using fastcq::cplx;
using fastcq::StageVector;

namespace {

std::vector<StageVector> random_stream(std::size_t N, int s, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<StageVector> out(N, StageVector(s));
    for (auto& v : out) {
        for (int i = 0; i < s; ++i) v(i) = cplx(u(rng), u(rng));
    }
    return out;
}

}  // namespace

TEST(FastConv, MatchesDirectConvolution) {
    const auto m = fastcq::builtin_method(fastcq::MethodName::RadauIIA2);
    const double h = 0.05;
    const std::size_t N = 400;
    const double tol = 1e-6;
    const auto mc = fastcq::method_constants(m, h);
    const auto plan = fastcq::build_plan(mc, m, 2.0, h, N * h, tol);
    const auto data = random_stream(N, 2, 9);
    for (double d : {0.0, 2.0}) {
        const auto tab = fastcq::weights_fft(fastcq::KernelSpec{1, d}, m, h, N, fastcq::default_rho(N));
        const auto a = fastcq::convolve_direct(tab, data);
        const auto b = fastcq::convolve_full(plan, m, tab, data);
        for (std::size_t n = 0; n < N; ++n) EXPECT_LE(std::abs(a[n] - b[n]), 10 * tol) << "d=" << d << " n=" << n;
    }
}

// stage_tail gives sum_{j > n0} W_j f_{n-j} with full matrices
TEST(FastConv, StageTailMatchesFullWeights) {
    const auto m = fastcq::builtin_method(fastcq::MethodName::RadauIIA2);
    const double h = 0.05;
    const std::size_t N = 150;
    const double tol = 1e-7;
    const auto mc = fastcq::method_constants(m, h);
    const auto plan = fastcq::build_plan(mc, m, 1.0, h, N * h, tol);
    const auto tab = fastcq::weights_fft(fastcq::KernelSpec{1, 1.0}, m, h, N, fastcq::default_rho(N), N + 1);
    const auto data = random_stream(N, 2, 4);
    fastcq::FastConvState st(plan, m, {1.0});
    for (std::size_t n = 0; n < N; ++n) {
        StageVector want = StageVector::Zero(2);
        for (std::size_t j = plan.n0 + 1; j <= n; ++j) want += tab.full[j] * data[n - j];
        const StageVector got = st.stage_tail(0);
        EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 10 * tol) << "n=" << n;
        st.advance(data[n]);
    }
}

TEST(FastConv, MemoryIndependentOfSteps) {
    const auto m = fastcq::builtin_method(fastcq::MethodName::BackwardEuler);
    const auto mc = fastcq::method_constants(m, 0.01);
    const auto plan = fastcq::build_plan(mc, m, 1.0, 0.01, 100.0, 1e-6);
    const std::size_t expected = static_cast<std::size_t>(plan.n0 + 1 + plan.N_Q());
    for (std::size_t N : {1000u, 10000u}) {
        fastcq::FastConvState st(plan, m, {1.0});
        StageVector f = StageVector::Constant(1, cplx(0.5, -0.2));
        for (std::size_t n = 0; n < N; ++n) st.advance(f);
        EXPECT_EQ(st.live_vector_count(), expected);
        EXPECT_EQ(st.window().size(), static_cast<std::size_t>(plan.n0 + 1));
        EXPECT_EQ(st.steps(), N);
    }
}

TEST(FastConv, Errors) {
    const auto m = fastcq::builtin_method(fastcq::MethodName::RadauIIA2);
    const auto mc = fastcq::method_constants(m, 0.1);
    const auto plan = fastcq::build_plan(mc, m, 1.0, 0.1, 10.0, 1e-4);
    fastcq::FastConvState st(plan, m, {1.0});
    EXPECT_THROW(st.advance(StageVector::Zero(3)), fastcq::LengthError);
    EXPECT_THROW((void)st.history(2.0), fastcq::DomainError);
    const auto tab = fastcq::weights_fft(fastcq::KernelSpec{1, 1.0}, m, 0.1, 4, fastcq::default_rho(4));
    if (tab.size() < static_cast<std::size_t>(plan.n0 + 1)) {
        EXPECT_THROW(fastcq::convolve_full(plan, m, tab, {}), fastcq::LengthError);
    }
}
