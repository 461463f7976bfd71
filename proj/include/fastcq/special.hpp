#pragma once

// Complex special functions used by the Schroedinger kernels:
//   sqrt(z/i), erf / erfcx / Faddeeva w, and the Bessel functions K0, I0, J0.
// All routines are pure and reentrant.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "fastcq/errors.hpp"

namespace fastcq {

using cplx = std::complex<double>;

inline constexpr cplx I_unit{0.0, 1.0};

/// e^{i*theta}
inline cplx cis(double theta) { return {std::cos(theta), std::sin(theta)}; }

/// e^{-i pi/4} * sqrt(z), principal sqrt with the cut on (-inf, 0].
/// On the cut the value of std::sqrt for the signed zero imaginary part is
/// returned, i.e. the limit from above for +0.
inline cplx sqrt_z_over_i(cplx z) {
    static const cplx rot = cis(-std::numbers::pi / 4.0);
    return rot * std::sqrt(z);
}

namespace detail {

inline constexpr double sqrt_pi = 1.772453850905516027298167483341;
inline constexpr double inv_sqrt_pi = 0.564189583547756286948079451561;
inline constexpr double two_over_sqrt_pi = 1.128379167095512573896158903122;
inline constexpr double euler_gamma = 0.577215664901532860606512090082;
// log(DBL_MAX) with a little headroom
inline constexpr double exp_overflow = 709.0;

inline cplx checked_exp(cplx z) {
    if (z.real() > exp_overflow) {
        throw OverflowError("complex exponential overflows double precision");
    }
    return std::exp(z);
}

// Maclaurin series of erf. The relative rounding error grows like
// exp(2 (Re z)^2), so callers restrict it to small |Re z|.
inline cplx erf_series(cplx z) {
    const cplx mz2 = -z * z;
    const double mag2 = std::norm(z);
    cplx term = z;
    cplx sum = z;
    for (int n = 1; n < 200000; ++n) {
        term *= mz2 / static_cast<double>(n);
        const cplx add = term / static_cast<double>(2 * n + 1);
        sum += add;
        if (n > mag2 && std::abs(add) <= 1e-17 * std::abs(sum)) {
            break;
        }
    }
    return two_over_sqrt_pi * sum;
}

// Laplace continued fraction for w(z), Im z > 0, evaluated by the modified
// Lentz algorithm until convergence:
//   w(z) = (i/sqrt(pi)) / (z - (1/2)/(z - 1/(z - (3/2)/(z - ...))))
inline cplx faddeeva_cf_lentz(cplx z) {
    constexpr double tiny = 1e-300;
    cplx f = z;
    cplx c = f;
    cplx d = 0.0;
    for (int j = 1; j < 100000; ++j) {
        const double a = -0.5 * j;
        d = z + a * d;
        if (d == 0.0) d = tiny;
        d = 1.0 / d;
        c = z + a / c;
        if (c == 0.0) c = tiny;
        const cplx delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) {
            break;
        }
    }
    return I_unit * inv_sqrt_pi / f;
}

// Same continued fraction truncated at a fixed depth; used for |z| >= 8
// where it agrees with w to full precision even on the real axis.
inline cplx faddeeva_cf_fixed(cplx z, int depth = 60) {
    cplx tail = z;
    for (int j = depth; j >= 1; --j) {
        tail = z - (0.5 * j) / tail;
    }
    return I_unit * inv_sqrt_pi / tail;
}

}  // namespace detail

/// Faddeeva function w(z) = exp(-z^2) erfc(-i z).
inline cplx faddeeva_w(cplx z) {
    if (z.imag() < 0.0) {
        // w(z) = 2 exp(-z^2) - w(-z)
        return 2.0 * detail::checked_exp(-z * z) - faddeeva_w(-z);
    }
    if (std::abs(z) >= 8.0) {
        return detail::faddeeva_cf_fixed(z);
    }
    if (z.imag() < 1.5) {
        const cplx u = -I_unit * z;  // Re u = Im z in [0, 1.5)
        return std::exp(-z * z) * (1.0 - detail::erf_series(u));
    }
    return detail::faddeeva_cf_lentz(z);
}

/// Scaled complementary error function exp(z^2) erfc(z).
inline cplx erfcx(cplx z) { return faddeeva_w(I_unit * z); }

/// Complementary error function.
inline cplx erfc(cplx z) {
    if (z.real() < 0.0) {
        return 2.0 - erfc(-z);
    }
    if (z.real() < 1.5 && std::abs(z) < 26.0) {
        return 1.0 - detail::erf_series(z);
    }
    return detail::checked_exp(-z * z) * erfcx(z);
}

/// Complex error function, relative accuracy about 1e-13 for |z| <= 26;
/// throws OverflowError where |erf z| exceeds the double range.
inline cplx erf(cplx z) {
    if (z.real() < 0.0) {
        return -erf(-z);
    }
    if (z.real() < 1.5 && std::abs(z) < 26.0) {
        return detail::erf_series(z);
    }
    return 1.0 - detail::checked_exp(-z * z) * erfcx(z);
}

namespace detail {

inline bool on_negative_axis(cplx z) {
    return z.imag() == 0.0 && z.real() <= 0.0;
}

// Power series; accurate for |z| <= 2.
inline cplx bessel_k0_series(cplx z) {
    const cplx y = 0.25 * z * z;
    cplx term = 1.0;
    cplx i0 = 1.0;
    cplx tail = 0.0;
    double harmonic = 0.0;
    for (int k = 1; k < 200; ++k) {
        term *= y / static_cast<double>(k * k);
        harmonic += 1.0 / k;
        i0 += term;
        tail += term * harmonic;
        if (std::abs(term) * (harmonic + 1.0) < 1e-17 * std::abs(i0)) {
            break;
        }
    }
    return -(std::log(0.5 * z) + euler_gamma) * i0 + tail;
}

// Steed's continued fraction for K0 (Temme's CF2), valid in the cut plane
// for |z| >= 2.
inline cplx bessel_k0_cf(cplx z) {
    cplx b = 2.0 * (1.0 + z);
    cplx d = 1.0 / b;
    cplx delh = d;
    cplx q1 = 0.0;
    cplx q2 = 1.0;
    const double a1 = 0.25;
    cplx q = a1;
    double c = a1;
    double a = -a1;
    cplx s = 1.0 + q * delh;
    for (int i = 1; i < 100000; ++i) {
        a -= 2.0 * i;
        c = -a * c / (i + 1.0);
        const cplx qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        const cplx dels = q * delh;
        s += dels;
        if (std::abs(dels) < 1e-17 * std::abs(s)) {
            break;
        }
    }
    return std::sqrt(std::numbers::pi / (2.0 * z)) * checked_exp(-z) / s;
}

inline cplx bessel_i0_series(cplx z) {
    const cplx y = 0.25 * z * z;
    cplx term = 1.0;
    cplx sum = 1.0;
    for (int k = 1; k < 100000; ++k) {
        term *= y / static_cast<double>(k * k);
        sum += term;
        if (static_cast<double>(k) > std::abs(z) && std::abs(term) < 1e-17 * std::abs(sum)) {
            break;
        }
    }
    return sum;
}

// I0(z) = (1/2 pi) int_0^{2 pi} exp(z cos t) dt by the trapezoidal rule, which
// converges geometrically for this periodic integrand; the error is about
// 2 I_M(z) for M points. Absolute error is eps exp(|Re z|).
inline cplx bessel_i0_trapezoid(cplx z) {
    if (std::abs(z.real()) > exp_overflow) {
        throw OverflowError("bessel_i0: result overflows double precision");
    }
    const int M = 2 * static_cast<int>(std::ceil(std::abs(z))) + 48;
    cplx sum = 0.0;
    // the integrand is even in t, so sum t in [0, pi] with end-point halving
    for (int k = 0; k <= M / 2; ++k) {
        const double w = (k == 0 || 2 * k == M) ? 0.5 : 1.0;
        sum += w * std::exp(z * std::cos(2.0 * std::numbers::pi * k / M));
    }
    return sum * (2.0 / M);
}

}  // namespace detail

/// Modified Bessel function K0, principal branch on C \ (-inf, 0].
inline cplx bessel_k0(cplx z) {
    if (detail::on_negative_axis(z)) {
        throw DomainError("bessel_k0: argument on the branch cut (-inf, 0]");
    }
    if (std::abs(z) <= 2.0) {
        return detail::bessel_k0_series(z);
    }
    if (z.real() >= 0.0) {
        return detail::bessel_k0_cf(z);
    }
    // left half plane: K0(z) = K0(-z) -+ i pi I0(z) for Im z >< 0
    const double sign = z.imag() > 0.0 ? 1.0 : -1.0;
    return detail::bessel_k0_cf(-z) - sign * I_unit * std::numbers::pi * detail::bessel_i0_trapezoid(z);
}

/// Modified Bessel function I0 (entire).
inline cplx bessel_i0(cplx z) {
    // Series loses roughly exp(|z| - |Re z|) relative accuracy.
    if (std::abs(z) - std::abs(z.real()) <= 8.0) {
        return detail::bessel_i0_series(z);
    }
    return detail::bessel_i0_trapezoid(z);
}

/// Bessel function of the first kind J0 (entire); J0(z) = I0(-i z).
inline cplx bessel_j0(cplx z) { return bessel_i0(-I_unit * z); }

}  // namespace fastcq
