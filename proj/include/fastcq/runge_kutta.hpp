#pragma once

// Butcher tableaux and the scalar/row-vector symbols of an implicit
// Runge-Kutta method used by convolution quadrature:
//   r(z) = 1 + z b^T (I - zA)^{-1} 1     stability function
//   q(z) = b^T (I - zA)^{-1}             row vector
//   v(z) = (I - zA)^{-1} 1               column vector, v_s(z) = r(z)
//   Delta(zeta) = (A + zeta/(1-zeta) 1 b^T)^{-1}
//   e_n(z) = r(z)^n q(z)

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "fastcq/errors.hpp"
#include "fastcq/special.hpp"

namespace fastcq {

inline constexpr int kMaxStages = 4;

using StageVector = Eigen::Matrix<cplx, Eigen::Dynamic, 1, 0, kMaxStages, 1>;
using StageRow = Eigen::Matrix<cplx, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxStages>;
using StageMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxStages, kMaxStages>;

enum class MethodName { BackwardEuler, RadauIIA2, RadauIIA3, LobattoIIIC2 };

struct RKMethod {
    std::string name;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    int order = 0;        // classical order p
    int stage_order = 0;  // stage order q

    [[nodiscard]] int stages() const { return static_cast<int>(b.size()); }
};

/// Throws CertificationError unless the tableau is A-stable on the imaginary
/// axis, has invertible A, is stiffly accurate and has c_s = 1.
inline void validate_method(const RKMethod& m) {
    const int s = m.stages();
    if (s < 1 || s > kMaxStages || m.A.rows() != s || m.A.cols() != s || m.c.size() != s) {
        throw CertificationError(m.name + ": inconsistent tableau dimensions");
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m.A);
    if (!lu.isInvertible()) {
        throw CertificationError(m.name + ": coefficient matrix A is singular");
    }
    const Eigen::RowVectorXd bAinv = m.b.transpose() * lu.inverse();
    for (int i = 0; i < s; ++i) {
        const double target = (i == s - 1) ? 1.0 : 0.0;
        if (std::abs(bAinv(i) - target) > 1e-13) {
            throw CertificationError(m.name + ": method is not stiffly accurate");
        }
    }
    if (std::abs(m.c(s - 1) - 1.0) > 1e-14) {
        throw CertificationError(m.name + ": c_s != 1");
    }
    // witness for A-stability: |r(iy)| <= 1 on a logarithmic sample of the axis
    const Eigen::MatrixXcd Ac = m.A.cast<cplx>();
    for (int k = -60; k <= 60; ++k) {
        const cplx z(0.0, std::pow(10.0, k / 10.0));
        const Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(s, s) - z * Ac;
        const Eigen::VectorXcd v = M.partialPivLu().solve(Eigen::VectorXcd::Ones(s));
        if (std::abs(v(s - 1)) > 1.0 + 1e-12) {
            throw CertificationError(m.name + ": |r| exceeds 1 on the imaginary axis");
        }
    }
}

namespace detail {

inline RKMethod make_backward_euler() {
    RKMethod m;
    m.name = "BackwardEuler";
    m.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
    m.b = Eigen::VectorXd::Constant(1, 1.0);
    m.c = Eigen::VectorXd::Constant(1, 1.0);
    m.order = 1;
    m.stage_order = 1;
    return m;
}

inline RKMethod make_radau2() {
    RKMethod m;
    m.name = "RadauIIA2";
    m.A.resize(2, 2);
    m.A << 5.0 / 12.0, -1.0 / 12.0,
           3.0 / 4.0, 1.0 / 4.0;
    m.b.resize(2);
    m.b << 3.0 / 4.0, 1.0 / 4.0;
    m.c.resize(2);
    m.c << 1.0 / 3.0, 1.0;
    m.order = 3;
    m.stage_order = 2;
    return m;
}

inline RKMethod make_radau3() {
    const double r6 = std::sqrt(6.0);
    RKMethod m;
    m.name = "RadauIIA3";
    m.A.resize(3, 3);
    m.A << (88.0 - 7.0 * r6) / 360.0, (296.0 - 169.0 * r6) / 1800.0, (-2.0 + 3.0 * r6) / 225.0,
           (296.0 + 169.0 * r6) / 1800.0, (88.0 + 7.0 * r6) / 360.0, (-2.0 - 3.0 * r6) / 225.0,
           (16.0 - r6) / 36.0, (16.0 + r6) / 36.0, 1.0 / 9.0;
    m.b = m.A.row(2).transpose();
    m.c.resize(3);
    m.c << (4.0 - r6) / 10.0, (4.0 + r6) / 10.0, 1.0;
    m.order = 5;
    m.stage_order = 3;
    return m;
}

inline RKMethod make_lobatto3c2() {
    RKMethod m;
    m.name = "LobattoIIIC2";
    m.A.resize(2, 2);
    m.A << 0.5, -0.5,
           0.5, 0.5;
    m.b.resize(2);
    m.b << 0.5, 0.5;
    m.c.resize(2);
    m.c << 0.0, 1.0;
    m.order = 2;
    m.stage_order = 1;
    return m;
}

}  // namespace detail

inline RKMethod builtin_method(MethodName name) {
    RKMethod m;
    switch (name) {
        case MethodName::BackwardEuler: m = detail::make_backward_euler(); break;
        case MethodName::RadauIIA2: m = detail::make_radau2(); break;
        case MethodName::RadauIIA3: m = detail::make_radau3(); break;
        case MethodName::LobattoIIIC2: m = detail::make_lobatto3c2(); break;
    }
    validate_method(m);
    return m;
}

/// Accepts the enum spelling and a few common aliases ("be", "radau2", ...).
inline MethodName parse_method_name(std::string_view s) {
    std::string key(s);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (key == "backwardeuler" || key == "be" || key == "radauiia1" || key == "radau1") {
        return MethodName::BackwardEuler;
    }
    if (key == "radauiia2" || key == "radau2") return MethodName::RadauIIA2;
    if (key == "radauiia3" || key == "radau3") return MethodName::RadauIIA3;
    if (key == "lobattoiiic2" || key == "lobatto2") return MethodName::LobattoIIIC2;
    throw DomainError("unknown Runge-Kutta method '" + std::string(s) + "'");
}

inline RKMethod builtin_method(std::string_view name) { return builtin_method(parse_method_name(name)); }

/// LU factorisation of I - zA with the derived symbols r, q, v.
class Resolvent {
public:
    Resolvent(const RKMethod& m, cplx z) : s_(m.stages()) {
        StageMatrix M = StageMatrix::Identity(s_, s_) - z * m.A.cast<cplx>();
        lu_.compute(M);
        const double scale = 1.0 + std::abs(z) * m.A.cwiseAbs().maxCoeff();
        if (std::abs(lu_.determinant()) <= 1e-14 * std::pow(scale, s_)) {
            throw SingularMatrixError("resolvent (I - zA) is singular at this z");
        }
        const StageMatrix inv = lu_.inverse();
        v_ = inv.rowwise().sum();
        q_ = m.b.transpose().cast<cplx>() * inv;
    }

    /// (I - zA)^{-1} 1
    [[nodiscard]] const StageVector& v() const { return v_; }
    /// b^T (I - zA)^{-1}
    [[nodiscard]] const StageRow& q() const { return q_; }
    /// Stability function; equals v_s for stiffly accurate methods.
    [[nodiscard]] cplx r() const { return v_(s_ - 1); }

private:
    int s_;
    Eigen::PartialPivLU<StageMatrix> lu_;
    StageVector v_;
    StageRow q_;
};

/// r(z) = 1 + z b^T (I - zA)^{-1} 1, evaluated as e_s^T (I - zA)^{-1} 1 which
/// is the same rational function for stiffly accurate methods but does not
/// cancel for large |z|.
inline cplx stability_r(const RKMethod& m, cplx z) { return Resolvent(m, z).r(); }

inline StageRow q_row(const RKMethod& m, cplx z) { return Resolvent(m, z).q(); }

inline StageVector v_col(const RKMethod& m, cplx z) { return Resolvent(m, z).v(); }

/// Delta(zeta) = (A + zeta/(1 - zeta) 1 b^T)^{-1}
inline StageMatrix symbol_delta(const RKMethod& m, cplx zeta) {
    if (zeta == cplx(1.0, 0.0)) {
        throw DomainError("symbol_delta: zeta = 1 is a pole");
    }
    const int s = m.stages();
    const cplx f = zeta / (1.0 - zeta);
    StageMatrix inner = m.A.cast<cplx>();
    inner += f * StageVector::Ones(s) * m.b.transpose().cast<cplx>();
    Eigen::PartialPivLU<StageMatrix> lu(inner);
    if (std::abs(lu.determinant()) <= 1e-300) {
        throw SingularMatrixError("symbol_delta: inner matrix is singular");
    }
    return lu.inverse();
}

/// z^n for complex z via magnitude/phase, safe against intermediate
/// overflow and underflow for large n.
inline cplx pow_polar(cplx z, long n) {
    if (n == 0) return 1.0;
    const double mag = std::abs(z);
    if (mag == 0.0) return 0.0;
    const double logmag = static_cast<double>(n) * std::log(mag);
    if (logmag < -745.0) return 0.0;
    if (logmag > detail::exp_overflow) {
        throw OverflowError("pow_polar: r(z)^n overflows");
    }
    return std::polar(std::exp(logmag), static_cast<double>(n) * std::arg(z));
}

/// e_n(z) = r(z)^n q(z)
inline StageRow e_n_row(const RKMethod& m, long n, cplx z) {
    if (n < 0) throw DomainError("e_n_row: negative lag");
    const Resolvent res(m, z);
    return pow_polar(res.r(), n) * res.q();
}

// ---------------------------------------------------------------------------
// Certified constants
// ---------------------------------------------------------------------------

struct MethodConstants {
    double C_A = 1.0;
    double nu = 1.0;
    double b_strip = 0.0;
    double C_q = 1.0;
    std::vector<double> xi_grid;       // increasing
    std::vector<double> gamma_values;  // certified gamma on xi_grid, nonincreasing
    std::vector<double> gamma_raw;     // grid infimum before the safety factor

    /// Conservative lookup: the certified value at the next grid point at or
    /// above xi (gamma is nonincreasing, so this never overestimates).
    [[nodiscard]] double gamma(double xi) const {
        if (xi_grid.empty()) throw CertificationError("gamma table is empty");
        auto it = std::lower_bound(xi_grid.begin(), xi_grid.end(), xi * (1.0 - 1e-12));
        if (it == xi_grid.end()) {
            throw CertificationError("gamma requested beyond the certified xi range");
        }
        return gamma_values[static_cast<std::size_t>(it - xi_grid.begin())];
    }
};

inline constexpr double kGammaSafety = 0.98;

/// Log-spaced grid from 1e-5 to 1e3 with eight points per decade.
inline std::vector<double> default_xi_grid() {
    std::vector<double> g;
    for (int k = -40; k <= 24; ++k) g.push_back(std::pow(10.0, k / 8.0));
    return g;
}

namespace detail {

// r(z) = prod(1 - z mu_i) / prod(1 - z lambda_i) with lambda = eig(A) and
// mu = eig(A - 1 b^T); cheap enough for the dense certification grids.
class FactoredStability {
public:
    explicit FactoredStability(const RKMethod& m) {
        const int s = m.stages();
        const Eigen::MatrixXd shifted = m.A - Eigen::VectorXd::Ones(s) * m.b.transpose();
        poles_ = m.A.eigenvalues();
        zeros_ = shifted.eigenvalues();
    }

    [[nodiscard]] cplx operator()(cplx z) const {
        cplx num = 1.0;
        cplx den = 1.0;
        for (Eigen::Index i = 0; i < zeros_.size(); ++i) num *= 1.0 - z * zeros_(i);
        for (Eigen::Index i = 0; i < poles_.size(); ++i) den *= 1.0 - z * poles_(i);
        return num / den;
    }

private:
    Eigen::VectorXcd poles_;
    Eigen::VectorXcd zeros_;
};

struct GammaSample {
    double value;
    bool at_edge;
};

// inf over -xi <= Re z < 0 of log|r(z)| / Re z on a 400 x 400 grid. |r| is
// symmetric under conjugation so only Im z >= 0 is sampled.
inline GammaSample gamma_grid_inf(const RKMethod& m, double xi, double y_max) {
    constexpr int nx = 400;
    constexpr int ny = 400;
    const FactoredStability r(m);
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (int i = 1; i <= nx; ++i) {
        const double x = -xi * i / nx;
        for (int j = 0; j < ny; ++j) {
            const double y = y_max * j / (ny - 1);
            const double val = std::log(std::abs(r({x, y}))) / x;
            if (val < best) {
                best = val;
                best_j = j;
            }
        }
    }
    return {best, best_j == ny - 1};
}

}  // namespace detail

/// gamma(xi) = inf_{-xi <= Re z <= 0} log|r(z)|/Re z for each xi of the grid,
/// with a 0.98 safety factor and monotone (nonincreasing) enforcement.
inline std::pair<std::vector<double>, std::vector<double>>
certify_gamma_table(const RKMethod& m, const std::vector<double>& xi_grid) {
    if (xi_grid.empty()) throw CertificationError("certify_constants: empty xi grid");
    std::vector<double> raw;
    raw.reserve(xi_grid.size());
    double running = std::numeric_limits<double>::infinity();
    for (double xi : xi_grid) {
        double y_max = std::max(10.0 * xi, 100.0);
        auto sample = detail::gamma_grid_inf(m, xi, y_max);
        if (sample.at_edge) {
            y_max *= 2.0;
            sample = detail::gamma_grid_inf(m, xi, y_max);
            if (sample.at_edge) {
                throw CertificationError(m.name + ": gamma infimum sits at the edge of the sampled strip");
            }
        }
        running = std::min(running, sample.value);
        raw.push_back(running);
    }
    std::vector<double> certified(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
        certified[k] = kGammaSafety * raw[k];
        if (!(certified[k] > 0.0 && certified[k] <= 1.0)) {
            throw CertificationError(m.name + ": gamma outside (0, 1]");
        }
    }
    return {std::move(raw), std::move(certified)};
}

/// C_A = sup_{Re z <= 0} |z| max(|r(z)|, ||q(z)||), including the |z| -> inf limit.
inline double certify_C_A(const RKMethod& m) {
    const int s = m.stages();
    const Eigen::MatrixXd Ainv = m.A.inverse();
    // |z| r(z) -> |e_s^T A^{-1} 1| and |z| q(z) -> ||b^T A^{-1}|| as |z| -> inf
    double best = std::max(std::abs(Ainv.row(s - 1).sum()), (m.b.transpose() * Ainv).norm());
    constexpr int nr = 220;
    constexpr int nt = 181;
    for (int i = 0; i < nr; ++i) {
        const double rad = std::pow(10.0, -3.0 + 11.0 * i / (nr - 1));
        for (int j = 0; j < nt; ++j) {
            const double th = std::numbers::pi / 2.0 + (std::numbers::pi / 2.0) * j / (nt - 1);
            const cplx z = std::polar(rad, th);
            const Resolvent res(m, z);
            best = std::max(best, rad * std::max(std::abs(res.r()), res.q().norm()));
        }
    }
    return best;
}

/// nu with |r(z)| <= exp(nu Re z) on 0 <= Re z <= b, and C_q = sup ||q|| on Re z <= b.
inline std::pair<double, double> certify_nu_Cq(const RKMethod& m, double b_strip) {
    if (!(b_strip > 0.0)) throw CertificationError("b_strip must be positive");
    const Eigen::VectorXcd eig = m.A.cast<cplx>().eigenvalues();
    double pole_re = std::numeric_limits<double>::infinity();
    for (int i = 0; i < eig.size(); ++i) pole_re = std::min(pole_re, (1.0 / eig(i)).real());
    if (b_strip >= 0.5 * pole_re) {
        throw CertificationError(m.name + ": b_strip too close to the poles of r");
    }
    const detail::FactoredStability r(m);
    double nu = 1.0;
    const double y_max = std::max(100.0, 10.0 / b_strip);
    for (int i = 1; i <= 60; ++i) {
        const double x = b_strip * i / 60.0;
        for (int j = 0; j < 400; ++j) {
            // cluster samples near the real axis where the supremum lives
            const double t = static_cast<double>(j) / 399.0;
            const double y = y_max * t * t;
            nu = std::max(nu, std::log(std::abs(r({x, y}))) / x);
        }
    }
    double Cq = 0.0;
    const double box = std::max(20.0, 4.0 * pole_re);
    for (int i = 0; i <= 240; ++i) {
        const double x = -box + (box + b_strip) * i / 240.0;
        for (int j = 0; j <= 240; ++j) {
            const double y = box * j / 240.0;
            Cq = std::max(Cq, q_row(m, {x, y}).norm());
        }
    }
    return {nu * 1.02, Cq * 1.02};
}

inline MethodConstants certify_constants(const RKMethod& m, const std::vector<double>& xi_grid,
                                         double b_strip) {
    MethodConstants mc;
    mc.xi_grid = xi_grid;
    std::tie(mc.gamma_raw, mc.gamma_values) = certify_gamma_table(m, xi_grid);
    mc.C_A = certify_C_A(m);
    mc.b_strip = b_strip;
    std::tie(mc.nu, mc.C_q) = certify_nu_Cq(m, b_strip);
    return mc;
}

/// Process-wide cache of the expensive gamma table and C_A; nu and C_q are
/// recomputed for the requested strip width.
inline MethodConstants method_constants(const RKMethod& m, double b_strip) {
    struct Entry {
        std::vector<double> raw, certified;
        double C_A;
    };
    static std::mutex mutex;
    static std::map<std::string, Entry> cache;
    Entry entry;
    {
        std::lock_guard lock(mutex);
        auto it = cache.find(m.name);
        if (it != cache.end()) entry = it->second;
    }
    const auto grid = default_xi_grid();
    if (entry.raw.empty()) {
        std::tie(entry.raw, entry.certified) = certify_gamma_table(m, grid);
        entry.C_A = certify_C_A(m);
        std::lock_guard lock(mutex);
        cache.emplace(m.name, entry);
    }
    MethodConstants mc;
    mc.xi_grid = grid;
    mc.gamma_raw = entry.raw;
    mc.gamma_values = entry.certified;
    mc.C_A = entry.C_A;
    mc.b_strip = b_strip;
    std::tie(mc.nu, mc.C_q) = certify_nu_Cq(m, b_strip);
    return mc;
}

}  // namespace fastcq
