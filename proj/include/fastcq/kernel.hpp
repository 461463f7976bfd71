#pragma once

// Green's function of i u_t + u_xx = 0 in D = 1, 2, 3 dimensions, its Laplace
// transform (transfer operator), the jump across the branch cut and the
// closed forms used for the one-dimensional exact solutions.

#include <cmath>
#include <complex>
#include <numbers>

#include "fastcq/errors.hpp"
#include "fastcq/special.hpp"

namespace fastcq {

struct KernelSpec {
    int dimension = 1;
    double d = 0.0;  // distance |x|

    void validate() const {
        if (dimension < 1 || dimension > 3) {
            throw DomainError("KernelSpec: dimension must be 1, 2 or 3");
        }
        if (!(d >= 0.0) || !std::isfinite(d)) {
            throw DomainError("KernelSpec: distance must be finite and nonnegative");
        }
        if (dimension > 1 && d == 0.0) {
            throw DomainError("KernelSpec: d = 0 is singular for D = 2, 3");
        }
    }
};

/// k(t, x) = i (4 pi i t)^{-D/2} exp(i d^2 / (4t))
inline cplx green_k(const KernelSpec& spec, double t) {
    spec.validate();
    if (!(t > 0.0)) throw DomainError("green_k: t must be positive");
    const cplx base = 4.0 * std::numbers::pi * I_unit * t;
    const cplx phase = std::exp(I_unit * (spec.d * spec.d / (4.0 * t)));
    cplx power;
    switch (spec.dimension) {
        case 1: power = 1.0 / std::sqrt(base); break;
        case 2: power = 1.0 / base; break;
        default: power = 1.0 / (base * std::sqrt(base)); break;
    }
    return I_unit * power * phase;
}

namespace detail {

// Transfer operator written in terms of s = sqrt(z/i).
inline cplx transfer_from_root(const KernelSpec& spec, cplx s) {
    switch (spec.dimension) {
        case 1: return checked_exp(-spec.d * s) / (2.0 * s);
        case 2: return bessel_k0(spec.d * s) / (2.0 * std::numbers::pi);
        default: return checked_exp(-spec.d * s) / (4.0 * std::numbers::pi * spec.d);
    }
}

}  // namespace detail

/// Laplace transform of k: exp(-d s)/(2s) in 1D, K0(d s)/(2 pi) in 2D and
/// exp(-d s)/(4 pi d) in 3D with s = sqrt(z/i).
inline cplx transfer_K(const KernelSpec& spec, cplx z) {
    spec.validate();
    if (z.imag() == 0.0 && z.real() <= 0.0) {
        throw DomainError("transfer_K: z on the branch cut (-inf, 0]");
    }
    return detail::transfer_from_root(spec, sqrt_z_over_i(z));
}

enum class CutSide { above, below };

/// Boundary value of K at z = lambda e^{+i pi} (above) or lambda e^{-i pi} (below).
inline cplx transfer_on_cut(const KernelSpec& spec, double lambda, CutSide side) {
    spec.validate();
    if (!(lambda > 0.0)) throw DomainError("transfer_on_cut: lambda must be positive");
    // sqrt(lambda e^{+-i pi} / i) = sqrt(lambda) e^{+-i pi/2 - i pi/4}
    const double angle = (side == CutSide::above) ? std::numbers::pi / 4.0 : -3.0 * std::numbers::pi / 4.0;
    return detail::transfer_from_root(spec, std::sqrt(lambda) * cis(angle));
}

/// G(lambda, x) = K(lambda e^{-i pi}) - K(lambda e^{i pi}).
inline cplx jump_G(const KernelSpec& spec, double lambda) {
    spec.validate();
    if (!(lambda > 0.0)) throw DomainError("jump_G: lambda must be positive");
    const double sl = std::sqrt(lambda);
    const cplx w = cis(std::numbers::pi / 4.0) * sl;
    switch (spec.dimension) {
        case 1: return I_unit * cis(std::numbers::pi / 4.0) / sl * std::cosh(spec.d * w);
        case 2: return 0.5 * I_unit * bessel_j0(cis(-std::numbers::pi / 4.0) * sl * spec.d);
        default: return std::sinh(spec.d * w) / (2.0 * std::numbers::pi * spec.d);
    }
}

/// sqrt(lambda) G(lambda, d) for D = 1; bounded as lambda -> 0.
inline cplx jump_G_scaled_1d(double d, double lambda) {
    if (!(lambda >= 0.0)) throw DomainError("jump_G_scaled_1d: lambda must be nonnegative");
    return I_unit * cis(std::numbers::pi / 4.0) * std::cosh(d * cis(std::numbers::pi / 4.0) * std::sqrt(lambda));
}

/// int_0^t k(s, d) ds in one dimension.
inline cplx time_integrated_kernel(double d, double t) {
    if (!(t > 0.0)) throw DomainError("time_integrated_kernel: t must be positive");
    if (!(d >= 0.0)) throw DomainError("time_integrated_kernel: d must be nonnegative");
    const double sqt = std::sqrt(t);
    const cplx head = cis(std::numbers::pi / 4.0) * std::exp(I_unit * (d * d / (4.0 * t))) *
                      std::sqrt(t / std::numbers::pi);
    return head - 0.5 * d * erf(cis(0.75 * std::numbers::pi) * d / (2.0 * sqt)) - 0.5 * d;
}

/// Free evolution (4 pi i t)^{-1/2} int exp(i (x-y)^2/(4t)) exp(-mu |y - b|) dy.
///
/// With tau = i t and X = x - b, completing the square in each half line gives
///   (1/2) exp(-X^2/(4 tau)) [ w(i z_-) + w(i z_+) ],  z_{-+} = (2 mu tau -+ X)/(2 sqrt(tau)),
/// where w is the Faddeeva function.
inline cplx free_evolution_exp(cplx mu, double b, double t, double x) {
    if (!(mu.real() > 0.0)) throw DomainError("free_evolution_exp: Re mu must be positive");
    if (!(t > 0.0)) throw DomainError("free_evolution_exp: t must be positive");
    const cplx tau = I_unit * t;
    const cplx st = std::sqrt(tau);
    const double X = x - b;
    const cplx zm = (2.0 * mu * tau - X) / (2.0 * st);
    const cplx zp = (2.0 * mu * tau + X) / (2.0 * st);
    const cplx gauss = detail::checked_exp(-X * X / (4.0 * tau));
    return 0.5 * gauss * (faddeeva_w(I_unit * zm) + faddeeva_w(I_unit * zp));
}

}  // namespace fastcq
