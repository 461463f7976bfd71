#pragma once

// Reference Runge-Kutta convolution quadrature: weights from the generating
// function K(Delta(zeta)/h) by scaled discrete Fourier inversion, the direct
// O(N^2) discrete convolution and the one-step RK solve of y' = z y + g.

#include <fftw3.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "fastcq/errors.hpp"
#include "fastcq/kernel.hpp"
#include "fastcq/runge_kutta.hpp"

namespace fastcq {

/// Scalar transfer operator lambda -> K(lambda); applied to matrices through
/// the eigen-decomposition of Delta.
using TransferOperator = std::function<cplx(cplx)>;

struct WeightTable {
    std::string method;
    int s = 1;
    double h = 0.0;
    double d = 0.0;
    double rho = 0.0;
    std::size_t L = 0;                // number of samples on the circle
    std::vector<StageRow> omega;      // last rows omega_n, n = 0..N
    std::vector<StageMatrix> full;    // full W_n for n < full.size()

    [[nodiscard]] std::size_t size() const { return omega.size(); }
};

/// eps^{1/(2N)} with eps = 1e-14.
inline double default_rho(std::size_t N) {
    return std::pow(1e-14, 1.0 / (2.0 * static_cast<double>(N)));
}

namespace detail {

struct FftwPlanGuard {
    fftw_plan plan = nullptr;
    ~FftwPlanGuard() {
        if (plan != nullptr) fftw_destroy_plan(plan);
    }
};

}  // namespace detail

/// Weights W_n, n = 0..N, of the generating function sum W_n zeta^n =
/// K(Delta(zeta)/h), sampled on the circle |zeta| = rho at L = 2N points.
/// Full s x s matrices are kept for n < n_full; otherwise only last rows.
inline WeightTable weights_fft(const TransferOperator& K, const RKMethod& m, double h, std::size_t N,
                               double rho, std::size_t n_full = 0) {
    if (N < 1) throw DomainError("weights_fft: N must be at least 1");
    if (!(rho > 0.0 && rho < 1.0)) throw DomainError("weights_fft: rho must lie in (0, 1)");
    if (!(h > 0.0)) throw DomainError("weights_fft: h must be positive");
    const int s = m.stages();
    const std::size_t L = 2 * N;
    const bool want_full = n_full > 0;
    const int rows = want_full ? s : 1;
    const int first_row = want_full ? 0 : s - 1;
    const std::size_t channels = static_cast<std::size_t>(rows) * s;

    // samples[c * L + l] holds entry c of K(Delta(rho zeta_l)/h)
    auto* samples = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * L * channels));
    if (samples == nullptr) throw std::bad_alloc();
    std::unique_ptr<fftw_complex, decltype(&fftw_free)> owner(samples, &fftw_free);
    auto* data = reinterpret_cast<cplx*>(samples);

    for (std::size_t l = 0; l < L; ++l) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(L);
        const cplx zeta = rho * cis(angle);
        const StageMatrix delta = symbol_delta(m, zeta);
        Eigen::ComplexEigenSolver<StageMatrix> eig(delta);
        if (eig.info() != Eigen::Success) throw SingularMatrixError("weights_fft: eigen-decomposition failed");
        const StageMatrix V = eig.eigenvectors();
        Eigen::PartialPivLU<StageMatrix> lu(V);
        if (std::abs(lu.determinant()) < 1e-13) {
            throw SingularMatrixError("weights_fft: Delta(zeta) is not diagonalisable");
        }
        const StageMatrix Vinv = lu.inverse();
        StageVector kvals(s);
        for (int i = 0; i < s; ++i) {
            const cplx lam = eig.eigenvalues()(i) / h;
            if (lam.imag() == 0.0 && lam.real() <= 0.0) {
                throw DomainError("weights_fft: sampled symbol lands on the branch cut");
            }
            kvals(i) = K(lam);
        }
        const StageMatrix F = V * kvals.asDiagonal() * Vinv;
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < s; ++j) {
                data[(static_cast<std::size_t>(i) * s + j) * L + l] = F(first_row + i, j);
            }
        }
    }

    detail::FftwPlanGuard guard;
    const int n = static_cast<int>(L);
    guard.plan = fftw_plan_many_dft(1, &n, static_cast<int>(channels), samples, nullptr, 1, n, samples, nullptr,
                                    1, n, FFTW_FORWARD, FFTW_ESTIMATE);
    if (guard.plan == nullptr) throw Error("weights_fft: FFTW planning failed");
    fftw_execute(guard.plan);

    WeightTable table;
    table.method = m.name;
    table.s = s;
    table.h = h;
    table.rho = rho;
    table.L = L;
    table.omega.assign(N + 1, StageRow::Zero(s));
    const std::size_t keep = std::min(n_full, N + 1);
    table.full.assign(keep, StageMatrix::Zero(s, s));
    const double logrho = std::log(rho);
    for (std::size_t k = 0; k <= N; ++k) {
        const double scale = std::exp(-static_cast<double>(k) * logrho) / static_cast<double>(L);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < s; ++j) {
                const cplx w = data[(static_cast<std::size_t>(i) * s + j) * L + k] * scale;
                if (first_row + i == s - 1) table.omega[k](j) = w;
                if (k < keep) table.full[k](first_row + i, j) = w;
            }
        }
    }
    return table;
}

/// Convolution weights of the Schroedinger transfer operator at distance spec.d.
inline WeightTable weights_fft(const KernelSpec& spec, const RKMethod& m, double h, std::size_t N, double rho,
                               std::size_t n_full = 0) {
    spec.validate();
    auto table = weights_fft([&spec](cplx z) { return transfer_K(spec, z); }, m, h, N, rho, n_full);
    table.d = spec.d;
    return table;
}

/// u_{n+1} = sum_{j=0}^{n} omega_{n-j} . g_j for n = 0..len(data)-1.
inline std::vector<cplx> convolve_direct(const WeightTable& table, const std::vector<StageVector>& data) {
    if (data.size() > table.size()) {
        throw LengthError("convolve_direct: more data than weights");
    }
    std::vector<cplx> out(data.size(), 0.0);
    for (std::size_t n = 0; n < data.size(); ++n) {
        if (data[n].size() != table.s) throw LengthError("convolve_direct: stage vector has the wrong size");
        cplx acc = 0.0;
        for (std::size_t j = 0; j <= n; ++j) {
            acc += (table.omega[n - j] * data[j])(0);
        }
        out[n] = acc;
    }
    return out;
}

struct OdeStepResult {
    cplx y;              // y_{n+1}
    StageVector stages;  // internal stages Y
};

/// One RK step for y' = z y + g with stage data g (length s):
/// (I - h z A) Y = y 1 + h A g, y_{n+1} = Y_s.
inline OdeStepResult discrete_ode_step(const RKMethod& m, cplx z, cplx y_prev, const StageVector& g, double h) {
    const int s = m.stages();
    if (g.size() != s) throw LengthError("discrete_ode_step: stage data has the wrong size");
    StageMatrix M = StageMatrix::Identity(s, s) - (h * z) * m.A.cast<cplx>();
    Eigen::PartialPivLU<StageMatrix> lu(M);
    const double scale = 1.0 + std::abs(h * z) * m.A.cwiseAbs().maxCoeff();
    if (std::abs(lu.determinant()) <= 1e-14 * std::pow(scale, s)) {
        throw SingularMatrixError("discrete_ode_step: singular resolvent");
    }
    const StageVector rhs = StageVector::Constant(s, y_prev) + h * (m.A.cast<cplx>() * g);
    OdeStepResult res;
    res.stages = lu.solve(rhs);
    res.y = res.stages(s - 1);
    return res;
}

/// CSV dump: n,i,re,im for every last-row weight.
inline void write_weight_csv(const WeightTable& table, std::ostream& os) {
    os << "n,i,re,im\n";
    os.precision(17);
    for (std::size_t n = 0; n < table.size(); ++n) {
        for (int i = 0; i < table.s; ++i) {
            os << n << ',' << i << ',' << table.omega[n](i).real() << ',' << table.omega[n](i).imag() << '\n';
        }
    }
}

}  // namespace fastcq
