#pragma once

// Volterra systems for Schroedinger equations with point potentials in 1D,
//   q_k(t) + sum_j int_0^t k(t-s, x_k - x_j) F_j(s) ds = rhs_k(t),
// discretised by Runge-Kutta convolution quadrature. The memory term of every
// step comes from either the direct O(N^2) sum or the oblivious engine.

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fastcq/cq_reference.hpp"
#include "fastcq/errors.hpp"
#include "fastcq/fast_conv.hpp"
#include "fastcq/kernel.hpp"
#include "fastcq/quad_plan.hpp"
#include "fastcq/runge_kutta.hpp"

namespace fastcq {

enum class EngineKind { fast, direct };

inline EngineKind parse_engine(const std::string& s) {
    if (s == "fast") return EngineKind::fast;
    if (s == "direct" || s == "naive") return EngineKind::direct;
    throw DomainError("unknown engine '" + s + "'");
}

inline const char* engine_name(EngineKind e) { return e == EngineKind::fast ? "fast" : "direct"; }

/// Strip width for the nu / C_q certification: h, kept well inside the poles of r.
inline double default_b_strip(const RKMethod& m, double h) {
    const Eigen::VectorXcd eig = m.A.cast<cplx>().eigenvalues();
    double pole_re = std::numeric_limits<double>::infinity();
    for (int i = 0; i < eig.size(); ++i) pole_re = std::min(pole_re, (1.0 / eig(i)).real());
    return std::min(h, 0.4 * pole_re);
}

// ---------------------------------------------------------------------------
// Convolution engines for multi-point systems
// ---------------------------------------------------------------------------

/// Memory terms sum_{l>=1} W_l(d) f_{j,n-l} for M data streams and a fixed set
/// of distances.
class ConvolutionEngine {
public:
    virtual ~ConvolutionEngine() = default;
    [[nodiscard]] virtual const StageMatrix& W0(std::size_t d_index) const = 0;
    [[nodiscard]] virtual StageVector memory(std::size_t source, std::size_t d_index) const = 0;
    virtual void push(std::size_t source, const StageVector& f) = 0;
    [[nodiscard]] virtual int n0() const { return 0; }
    [[nodiscard]] virtual int N_Q() const { return 0; }
    [[nodiscard]] virtual std::size_t live_vectors() const = 0;
    [[nodiscard]] virtual const QuadraturePlan* plan() const { return nullptr; }
};

class DirectEngine final : public ConvolutionEngine {
public:
    DirectEngine(const RKMethod& m, double h, std::size_t N, const std::vector<double>& distances,
                 std::size_t sources) {
        for (double d : distances) {
            tables_.push_back(weights_fft(KernelSpec{1, d}, m, h, N, default_rho(N), N + 1));
        }
        data_.resize(sources);
    }

    [[nodiscard]] const StageMatrix& W0(std::size_t d_index) const override { return tables_.at(d_index).full[0]; }

    [[nodiscard]] StageVector memory(std::size_t source, std::size_t d_index) const override {
        const auto& hist = data_.at(source);
        const auto& W = tables_.at(d_index).full;
        const std::size_t n = hist.size();
        if (n >= W.size()) throw LengthError("DirectEngine: more steps than weights");
        StageVector out = StageVector::Zero(W[0].rows());
        for (std::size_t l = 1; l <= n; ++l) out += W[l] * hist[n - l];
        return out;
    }

    void push(std::size_t source, const StageVector& f) override { data_.at(source).push_back(f); }

    [[nodiscard]] std::size_t live_vectors() const override {
        std::size_t c = 0;
        for (const auto& d : data_) c += d.size();
        return c;
    }

private:
    std::vector<WeightTable> tables_;
    std::vector<std::vector<StageVector>> data_;
};

class FastEngine final : public ConvolutionEngine {
public:
    FastEngine(const RKMethod& m, QuadraturePlan plan, const std::vector<double>& distances, std::size_t sources)
        : plan_(std::move(plan)) {
        const std::size_t n_local = 2 * static_cast<std::size_t>(plan_.n0 + 1);
        for (double d : distances) {
            local_.push_back(weights_fft(KernelSpec{1, d}, m, plan_.h, n_local, default_rho(n_local),
                                         static_cast<std::size_t>(plan_.n0 + 1)));
        }
        for (std::size_t j = 0; j < sources; ++j) states_.emplace_back(plan_, m, distances);
    }

    [[nodiscard]] const StageMatrix& W0(std::size_t d_index) const override { return local_.at(d_index).full[0]; }

    [[nodiscard]] StageVector memory(std::size_t source, std::size_t d_index) const override {
        const auto& st = states_.at(source);
        const auto& W = local_.at(d_index).full;
        const auto& win = st.window();
        StageVector out = st.stage_tail(d_index);
        // newest n0 entries of the window are f_{n-1}, ..., f_{n-n0}
        const std::size_t w = win.size();
        const std::size_t lags = std::min<std::size_t>(w, static_cast<std::size_t>(plan_.n0));
        for (std::size_t l = 1; l <= lags; ++l) out += W[l] * win[w - l];
        return out;
    }

    void push(std::size_t source, const StageVector& f) override { states_.at(source).advance(f); }

    [[nodiscard]] int n0() const override { return plan_.n0; }
    [[nodiscard]] int N_Q() const override { return plan_.N_Q(); }
    [[nodiscard]] std::size_t live_vectors() const override {
        std::size_t c = 0;
        for (const auto& st : states_) c += st.live_vector_count();
        return c;
    }
    [[nodiscard]] const QuadraturePlan* plan() const override { return &plan_; }

private:
    QuadraturePlan plan_;
    std::vector<WeightTable> local_;
    std::vector<FastConvState> states_;
};

struct EngineSettings {
    EngineKind kind = EngineKind::fast;
    double tol = 1e-6;
    PlanOptions plan_options{};
};

inline std::unique_ptr<ConvolutionEngine> make_engine(const EngineSettings& es, const RKMethod& m, double h,
                                                      double T, const std::vector<double>& distances,
                                                      std::size_t sources) {
    const auto N = static_cast<std::size_t>(std::llround(T / h));
    if (es.kind == EngineKind::direct) {
        return std::make_unique<DirectEngine>(m, h, N, distances, sources);
    }
    const double d_max = *std::max_element(distances.begin(), distances.end());
    const auto mc = method_constants(m, default_b_strip(m, h));
    auto plan = build_plan(mc, m, d_max, h, T, es.tol, es.plan_options);
    return std::make_unique<FastEngine>(m, std::move(plan), distances, sources);
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

struct ChargeTrajectory {
    std::string method;
    std::string engine;
    double h = 0.0;
    double T = 0.0;
    double tol = 0.0;
    int n0 = 0;
    int N_Q = 0;
    std::vector<double> points;                    // x_j
    std::vector<double> t_start;                   // t_n
    std::vector<std::vector<StageVector>> stages;  // stages[n][j]
    std::vector<int> iterations;                   // fixed-point iterations per step
    bool truncated = false;
    std::optional<std::size_t> truncation_step;
    std::string truncation_reason;
    double setup_seconds = 0.0;  // weights, plan and engine construction
    double wall_seconds = 0.0;   // time stepping only
    double gamma = 0.0;
    double sigma = 0.0;

    [[nodiscard]] std::size_t steps() const { return stages.size(); }
    /// Value at t_{n+1}: the last stage (c_s = 1).
    [[nodiscard]] cplx endpoint(std::size_t n, std::size_t j) const {
        const auto& v = stages.at(n).at(j);
        return v(v.size() - 1);
    }
    [[nodiscard]] double t_end(std::size_t n) const { return t_start.at(n) + h; }
};

/// Columns t, j, re, im, abs2, iterations (one row per step and point, at t_{n+1}).
inline void write_trajectory_csv(const ChargeTrajectory& tr, std::ostream& os) {
    os << "t,j,re,im,abs2,iterations\n";
    os.precision(15);
    for (std::size_t n = 0; n < tr.steps(); ++n) {
        for (std::size_t j = 0; j < tr.points.size(); ++j) {
            const cplx v = tr.endpoint(n, j);
            const int it = n < tr.iterations.size() ? tr.iterations[n] : 0;
            os << tr.t_end(n) << ',' << j + 1 << ',' << v.real() << ',' << v.imag() << ',' << std::norm(v) << ','
               << it << '\n';
        }
    }
}

inline nlohmann::json trajectory_metadata(const ChargeTrajectory& tr) {
    nlohmann::json j;
    j["method"] = tr.method;
    j["engine"] = tr.engine;
    j["h"] = tr.h;
    j["T"] = tr.T;
    j["tol"] = tr.tol;
    j["n0"] = tr.n0;
    j["N_Q"] = tr.N_Q;
    j["points"] = tr.points;
    j["steps"] = tr.steps();
    j["gamma"] = tr.gamma;
    j["sigma"] = tr.sigma;
    j["truncated"] = tr.truncated;
    if (tr.truncation_step) j["truncation_step"] = *tr.truncation_step;
    if (!tr.truncation_reason.empty()) j["truncation_reason"] = tr.truncation_reason;
    j["setup_seconds"] = tr.setup_seconds;
    j["wall_seconds"] = tr.wall_seconds;
    return j;
}

namespace detail {

// unique pairwise distances; index[k][j] points into the returned list
inline std::vector<double> pair_distances(const std::vector<double>& x, std::vector<std::vector<std::size_t>>& index) {
    std::vector<double> ds;
    index.assign(x.size(), std::vector<std::size_t>(x.size()));
    for (std::size_t k = 0; k < x.size(); ++k) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double d = std::abs(x[k] - x[j]);
            auto it = std::find(ds.begin(), ds.end(), d);
            if (it == ds.end()) {
                ds.push_back(d);
                it = ds.end() - 1;
            }
            index[k][j] = static_cast<std::size_t>(it - ds.begin());
        }
    }
    return ds;
}

inline void check_points(const std::vector<double>& x) {
    if (x.empty()) throw DomainError("at least one potential point is required");
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            if (x[i] == x[j]) throw DomainError("potential points must be distinct");
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear system with time-dependent point potentials
// ---------------------------------------------------------------------------

struct LinearConfig {
    std::vector<double> x;
    std::vector<std::function<double(double)>> V;  // V_j(t), t > 0
    std::vector<double> Vbar;                      // V_j for t <= 0
    double omega = 1.0;
    std::function<double(double)> psi0;
};

/// x = -1, 1; psi0 = cosh x / cosh 1 inside, e^{1-|x|} outside; V = -c(1 +- sin t), c = 1 + tanh 1.
inline LinearConfig two_point_example() {
    const double c = 1.0 + std::tanh(1.0);
    LinearConfig cfg;
    cfg.x = {-1.0, 1.0};
    cfg.V = {[c](double t) { return -c * (1.0 + std::sin(t)); }, [c](double t) { return -c * (1.0 - std::sin(t)); }};
    cfg.Vbar = {-c, -c};
    cfg.omega = 1.0;
    cfg.psi0 = [](double x) { return std::abs(x) <= 1.0 ? std::cosh(x) / std::cosh(1.0) : std::exp(1.0 - std::abs(x)); };
    return cfg;
}

/// Steps the block system
///   q_{k,n} + sum_j sum_l W_{n-l}(x_k - x_j) (V_{j,l} q_{j,l} - Vbar_j psi0(x_j) e^{i omega t_l})
///     = psi0(x_k) e^{i omega t_n}.
inline ChargeTrajectory solve_linear_two_point(const LinearConfig& cfg, const RKMethod& m, double h, double T,
                                               const EngineSettings& es) {
    detail::check_points(cfg.x);
    const std::size_t M = cfg.x.size();
    if (cfg.V.size() != M || cfg.Vbar.size() != M) throw LengthError("solve_linear_two_point: config size mismatch");
    const auto start = std::chrono::steady_clock::now();
    const int s = m.stages();
    const auto N = static_cast<std::size_t>(std::llround(T / h));

    std::vector<std::vector<std::size_t>> didx;
    const auto distances = detail::pair_distances(cfg.x, didx);
    auto engine = make_engine(es, m, h, T, distances, M);

    ChargeTrajectory tr;
    tr.method = m.name;
    tr.engine = engine_name(es.kind);
    tr.h = h;
    tr.T = T;
    tr.tol = es.tol;
    tr.n0 = engine->n0();
    tr.N_Q = engine->N_Q();
    tr.points = cfg.x;
    auto stepping = std::chrono::steady_clock::now();
    tr.setup_seconds = std::chrono::duration<double>(stepping - start).count();

    std::vector<double> psi_at(M);
    for (std::size_t j = 0; j < M; ++j) psi_at[j] = cfg.psi0(cfg.x[j]);

    const long ms = static_cast<long>(M) * s;
    Eigen::MatrixXcd block(ms, ms);
    Eigen::VectorXcd rhs(ms);
    for (std::size_t n = 0; n < N; ++n) {
        const double tn = static_cast<double>(n) * h;
        StageVector phase(s);
        std::vector<Eigen::VectorXd> Vdiag(M, Eigen::VectorXd(s));
        for (int i = 0; i < s; ++i) {
            const double t = tn + m.c(i) * h;
            phase(i) = std::exp(I_unit * (cfg.omega * t));
            for (std::size_t j = 0; j < M; ++j) Vdiag[j](i) = cfg.V[j](t);
        }
        block.setZero();
        for (std::size_t k = 0; k < M; ++k) {
            StageVector r = psi_at[k] * phase;
            for (std::size_t j = 0; j < M; ++j) {
                const StageMatrix& W0 = engine->W0(didx[k][j]);
                block.block(k * s, j * s, s, s) = W0 * Vdiag[j].cast<cplx>().asDiagonal();
                r += W0 * (cfg.Vbar[j] * psi_at[j] * phase);
                r -= engine->memory(j, didx[k][j]);
            }
            block.block(k * s, k * s, s, s) += Eigen::MatrixXcd::Identity(s, s);
            rhs.segment(k * s, s) = r;
        }
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(block);
        if (!lu.isInvertible()) {
            throw SingularMatrixError("solve_linear_two_point: singular block system at step " + std::to_string(n));
        }
        const Eigen::VectorXcd sol = lu.solve(rhs);
        std::vector<StageVector> qn(M);
        for (std::size_t j = 0; j < M; ++j) {
            qn[j] = sol.segment(j * s, s);
            const StageVector f = Vdiag[j].cast<cplx>().cwiseProduct(qn[j]) - cfg.Vbar[j] * psi_at[j] * phase;
            engine->push(j, f);
        }
        tr.t_start.push_back(tn);
        tr.stages.push_back(std::move(qn));
        tr.iterations.push_back(1);
    }
    tr.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - stepping).count();
    return tr;
}

// ---------------------------------------------------------------------------
// Bound states of two attractive delta wells at -a and a
// ---------------------------------------------------------------------------

struct BoundStatePair {
    double lambda_f = 0.0;
    double lambda_e = 0.0;
    double N_f = 0.0;
    double N_e = 0.0;
    double a = 0.0;
    double gamma = 0.0;
};

/// K(i lambda, x) = exp(-sqrt(lambda) |x|) / (2 sqrt(lambda))
inline double bound_state_K(double lambda, double x) {
    const double mu = std::sqrt(lambda);
    return std::exp(-mu * std::abs(x)) / (2.0 * mu);
}

inline BoundStatePair bound_states(double a, double gamma) {
    if (!(a > 0.0)) throw DomainError("bound_states: a must be positive");
    if (!(gamma < 0.0)) throw DomainError("bound_states: gamma must be negative");
    const double target = -1.0 / gamma;
    auto solve = [&](auto&& f, double lo, double hi, const char* which) {
        if (!(f(lo) > 0.0 && f(hi) < 0.0)) {
            throw DomainError(std::string("bound_states: no bracket for the ") + which + " state");
        }
        std::uintmax_t iters = 200;
        auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(53), iters);
        return 0.5 * (r.first + r.second);
    };
    // both left-hand sides decrease monotonically in lambda
    auto ff = [&](double l) { return bound_state_K(l, 0.0) + bound_state_K(l, 2.0 * a) - target; };
    auto fe = [&](double l) { return bound_state_K(l, 0.0) - bound_state_K(l, 2.0 * a) - target; };
    BoundStatePair p;
    p.a = a;
    p.gamma = gamma;
    p.lambda_f = solve(ff, 1e-14, 1e6, "even");
    p.lambda_e = solve(fe, 1e-14, 1e6, "odd");
    auto norm = [a](double lambda, double sign) {
        const double mu = std::sqrt(lambda);
        return 2.0 * mu / std::sqrt(2.0 / mu + sign * 2.0 * std::exp(-2.0 * mu * a) * (1.0 / mu + 2.0 * a));
    };
    p.N_f = norm(p.lambda_f, 1.0);
    p.N_e = norm(p.lambda_e, -1.0);
    return p;
}

inline double phi_f(const BoundStatePair& p, double x) {
    return p.N_f * (bound_state_K(p.lambda_f, x + p.a) + bound_state_K(p.lambda_f, x - p.a));
}

inline double phi_e(const BoundStatePair& p, double x) {
    return p.N_e * (bound_state_K(p.lambda_e, x + p.a) - bound_state_K(p.lambda_e, x - p.a));
}

/// alpha e^{i lambda_f t} phi_f(x) + beta e^{i lambda_e t} phi_e(x)
inline cplx exact_linear_beating(const BoundStatePair& p, double alpha, double beta, double t, double x) {
    if (std::abs(alpha * alpha + beta * beta - 1.0) > 1e-12) {
        throw DomainError("exact_linear_beating: alpha^2 + beta^2 must be 1");
    }
    return alpha * std::exp(I_unit * (p.lambda_f * t)) * phi_f(p, x) +
           beta * std::exp(I_unit * (p.lambda_e * t)) * phi_e(p, x);
}

/// Free evolution of psi0 = alpha phi_f + beta phi_e evaluated at (t, x).
inline cplx free_bound_state_evolution(const BoundStatePair& p, double alpha, double beta, double t, double x) {
    if (t == 0.0) return alpha * phi_f(p, x) + beta * phi_e(p, x);
    const double mf = std::sqrt(p.lambda_f);
    const double me = std::sqrt(p.lambda_e);
    const double cf = alpha * p.N_f / (2.0 * mf);
    const double ce = beta * p.N_e / (2.0 * me);
    return cf * (free_evolution_exp(mf, -p.a, t, x) + free_evolution_exp(mf, p.a, t, x)) +
           ce * (free_evolution_exp(me, -p.a, t, x) - free_evolution_exp(me, p.a, t, x));
}

// ---------------------------------------------------------------------------
// Nonlinear point interactions
// ---------------------------------------------------------------------------

struct NonlinearConfig {
    double a = 3.0;
    double sigma = 0.0;
    double alpha = std::sqrt(0.01);
    double beta = std::sqrt(0.99);
    double gamma_linear = -0.5;          // coupling defining the bound states
    std::optional<double> gamma;          // nonlinear coupling; default from psi0
    double blowup_threshold = 1e6;
    int max_iterations = 50;
    int divergence_window = 5;
    bool throw_on_divergence = false;  // otherwise the run is truncated and flagged
};

/// -1 / (|psi0(a)|^{2 sigma} + |psi0(-a)|^{2 sigma})
inline double default_nonlinear_gamma(const BoundStatePair& p, double alpha, double beta, double sigma) {
    const double qa = std::abs(alpha * phi_f(p, p.a) + beta * phi_e(p, p.a));
    const double qm = std::abs(alpha * phi_f(p, -p.a) + beta * phi_e(p, -p.a));
    return -1.0 / (std::pow(qa, 2.0 * sigma) + std::pow(qm, 2.0 * sigma));
}

namespace detail {

inline cplx power_nonlinearity(cplx q, double sigma) {
    if (sigma == 0.0) return q;
    return std::pow(std::abs(q), 2.0 * sigma) * q;
}

}  // namespace detail

/// Solves q_k + gamma sum_j int k(t-s, x_k-x_j)(g(q_j) - g(q_j(0))) ds = phi_k - f_k,
/// g(q) = |q|^{2 sigma} q, with x = -a, a. Each step solves the 2s stage equations
/// by Newton's method started from the extrapolated previous stages.
inline ChargeTrajectory solve_nonlinear(const NonlinearConfig& cfg, const RKMethod& m, double h, double T,
                                        const BoundStatePair& pair, const EngineSettings& es) {
    if (!(cfg.sigma >= 0.0)) throw DomainError("solve_nonlinear: sigma must be nonnegative");
    const auto start = std::chrono::steady_clock::now();
    const double gamma = cfg.gamma ? *cfg.gamma : default_nonlinear_gamma(pair, cfg.alpha, cfg.beta, cfg.sigma);
    if (!(gamma < 0.0)) throw DomainError("solve_nonlinear: gamma must be negative");
    const int s = m.stages();
    const auto N = static_cast<std::size_t>(std::llround(T / h));
    const std::vector<double> x{-cfg.a, cfg.a};
    constexpr std::size_t M = 2;

    std::vector<std::vector<std::size_t>> didx;
    const auto distances = detail::pair_distances(x, didx);
    auto engine = make_engine(es, m, h, T, distances, M);

    ChargeTrajectory tr;
    tr.method = m.name;
    tr.engine = engine_name(es.kind);
    tr.h = h;
    tr.T = T;
    tr.tol = es.tol;
    tr.n0 = engine->n0();
    tr.N_Q = engine->N_Q();
    tr.points = x;
    tr.gamma = gamma;
    tr.sigma = cfg.sigma;
    auto stepping = std::chrono::steady_clock::now();
    tr.setup_seconds = std::chrono::duration<double>(stepping - start).count();

    std::array<cplx, M> q0{};
    std::array<cplx, M> g0{};
    for (std::size_t j = 0; j < M; ++j) {
        q0[j] = cfg.alpha * phi_f(pair, x[j]) + cfg.beta * phi_e(pair, x[j]);
        g0[j] = detail::power_nonlinearity(q0[j], cfg.sigma);
    }

    const long ms = static_cast<long>(M) * s;
    std::vector<StageVector> guess(M);
    for (std::size_t j = 0; j < M; ++j) guess[j] = StageVector::Constant(s, q0[j]);
    const double res_tol = 0.1 * es.tol;

    for (std::size_t n = 0; n < N; ++n) {
        const double tn = static_cast<double>(n) * h;
        // right-hand side without the current-step convolution term
        std::vector<StageVector> rhs(M, StageVector(s));
        for (std::size_t k = 0; k < M; ++k) {
            for (int i = 0; i < s; ++i) {
                const double t = tn + m.c(i) * h;
                cplx v = free_bound_state_evolution(pair, cfg.alpha, cfg.beta, t, x[k]);
                if (t > 0.0) {
                    for (std::size_t j = 0; j < M; ++j) {
                        v -= gamma * g0[j] * time_integrated_kernel(std::abs(x[k] - x[j]), t);
                    }
                }
                rhs[k](i) = v;
            }
            for (std::size_t j = 0; j < M; ++j) {
                rhs[k] -= gamma * engine->memory(j, didx[k][j]);
                rhs[k] += gamma * (engine->W0(didx[k][j]) * StageVector::Constant(s, g0[j]));
            }
        }

        auto residual = [&](const std::vector<StageVector>& q) {
            double worst = 0.0;
            for (std::size_t k = 0; k < M; ++k) {
                StageVector r = q[k] - rhs[k];
                for (std::size_t j = 0; j < M; ++j) {
                    StageVector gq(s);
                    for (int i = 0; i < s; ++i) gq(i) = detail::power_nonlinearity(q[j](i), cfg.sigma);
                    r += gamma * (engine->W0(didx[k][j]) * gq);
                }
                worst = std::max(worst, r.cwiseAbs().maxCoeff());
            }
            return worst;
        };

        std::vector<StageVector> q = guess;
        double res = residual(q);
        int iters = 0;
        int growth = 0;
        bool diverged = false;
        // Newton on the realified system: g is not holomorphic, its differential is
        // dg = (1 + sigma)|q|^{2 sigma} dq + sigma |q|^{2 sigma - 2} q^2 conj(dq).
        Eigen::MatrixXcd P(ms, ms);
        Eigen::MatrixXcd Qc(ms, ms);
        Eigen::VectorXcd F(ms);
        Eigen::MatrixXd Jr(2 * ms, 2 * ms);
        Eigen::VectorXd Fr(2 * ms);
        while (res > res_tol && iters < cfg.max_iterations) {
            for (std::size_t k = 0; k < M; ++k) {
                StageVector r = q[k] - rhs[k];
                for (std::size_t j = 0; j < M; ++j) {
                    const StageMatrix& W0 = engine->W0(didx[k][j]);
                    StageVector gq(s), da(s), db(s);
                    for (int i = 0; i < s; ++i) {
                        const cplx z = q[j](i);
                        const double mod = std::abs(z);
                        gq(i) = detail::power_nonlinearity(z, cfg.sigma);
                        da(i) = cfg.sigma == 0.0 ? 1.0 : (1.0 + cfg.sigma) * std::pow(mod, 2.0 * cfg.sigma);
                        db(i) = (cfg.sigma == 0.0 || mod == 0.0)
                                    ? cplx(0.0)
                                    : cfg.sigma * std::pow(mod, 2.0 * cfg.sigma - 2.0) * z * z;
                    }
                    r += gamma * (W0 * gq);
                    P.block(k * s, j * s, s, s) = gamma * W0 * da.asDiagonal();
                    Qc.block(k * s, j * s, s, s) = gamma * W0 * db.asDiagonal();
                }
                P.block(k * s, k * s, s, s) += Eigen::MatrixXcd::Identity(s, s);
                F.segment(k * s, s) = r;
            }
            Jr.topLeftCorner(ms, ms) = P.real() + Qc.real();
            Jr.topRightCorner(ms, ms) = -P.imag() + Qc.imag();
            Jr.bottomLeftCorner(ms, ms) = P.imag() + Qc.imag();
            Jr.bottomRightCorner(ms, ms) = P.real() - Qc.real();
            Fr << F.real(), F.imag();
            const Eigen::VectorXd step = Jr.partialPivLu().solve(-Fr);
            for (std::size_t j = 0; j < M; ++j) {
                for (int i = 0; i < s; ++i) {
                    const long idx = static_cast<long>(j) * s + i;
                    q[j](i) += cplx(step(idx), step(ms + idx));
                }
            }
            ++iters;
            const double next = residual(q);
            growth = (next > res) ? growth + 1 : 0;
            res = next;
            if (!std::isfinite(res) || growth >= cfg.divergence_window) {
                diverged = true;
                break;
            }
        }

        double biggest = 0.0;
        for (std::size_t j = 0; j < M; ++j) biggest = std::max(biggest, q[j].cwiseAbs().maxCoeff());
        if (diverged && cfg.throw_on_divergence) {
            throw DivergenceError("solve_nonlinear: fixed-point iteration diverged at step " + std::to_string(n), n);
        }
        if (diverged || !std::isfinite(biggest) || biggest > cfg.blowup_threshold) {
            tr.truncated = true;
            tr.truncation_step = n;
            tr.truncation_reason = diverged ? "fixed-point divergence" : "stage magnitude above blow-up threshold";
            break;
        }

        for (std::size_t j = 0; j < M; ++j) {
            StageVector f(s);
            for (int i = 0; i < s; ++i) f(i) = detail::power_nonlinearity(q[j](i), cfg.sigma) - g0[j];
            engine->push(j, f);
        }
        tr.t_start.push_back(tn);
        tr.stages.push_back(q);
        tr.iterations.push_back(iters);
        // linear extrapolation of the last two steps as the next initial guess
        for (std::size_t j = 0; j < M; ++j) {
            guess[j] = tr.stages.size() >= 2 ? StageVector(2.0 * q[j] - tr.stages[tr.stages.size() - 2][j]) : q[j];
        }
    }
    tr.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - stepping).count();
    return tr;
}

// ---------------------------------------------------------------------------
// Convergence table for the linear beating problem
// ---------------------------------------------------------------------------

struct ConvergenceRow {
    double h = 0.0;
    double error = 0.0;
    std::optional<double> eoc;
    int n0 = 0;
    int N_Q = 0;
};

/// max_n max_j | |q_j(t_n)|^2 - |q_j^ex(t_n)|^2 |
inline double beating_error(const ChargeTrajectory& tr, const BoundStatePair& p, double alpha, double beta) {
    double err = 0.0;
    for (std::size_t n = 0; n < tr.steps(); ++n) {
        const double t = tr.t_end(n);
        for (std::size_t j = 0; j < tr.points.size(); ++j) {
            const double ex = std::norm(exact_linear_beating(p, alpha, beta, t, tr.points[j]));
            err = std::max(err, std::abs(std::norm(tr.endpoint(n, j)) - ex));
        }
    }
    return err;
}

inline std::vector<ConvergenceRow> beating_convergence(const std::vector<double>& hs, const RKMethod& m, double T,
                                                       const EngineSettings& es,
                                                       const NonlinearConfig& base = NonlinearConfig{}) {
    NonlinearConfig cfg = base;
    cfg.sigma = 0.0;
    const auto pair = bound_states(cfg.a, cfg.gamma_linear);
    std::vector<ConvergenceRow> rows;
    for (double h : hs) {
        const auto tr = solve_nonlinear(cfg, m, h, T, pair, es);
        ConvergenceRow row;
        row.h = h;
        row.error = beating_error(tr, pair, cfg.alpha, cfg.beta);
        row.n0 = tr.n0;
        row.N_Q = tr.N_Q;
        if (!rows.empty()) row.eoc = std::log2(rows.back().error / row.error);
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Timing benchmark: fast versus direct engine on the nonlinear problem
// ---------------------------------------------------------------------------

struct BenchRow {
    std::size_t N = 0;
    EngineKind engine = EngineKind::fast;
    double seconds = 0.0;        // time stepping only
    double setup_seconds = 0.0;
    int n0 = 0;
    int N_Q = 0;
    bool truncated = false;
};

inline std::vector<BenchRow> run_engine_bench(const std::vector<std::size_t>& Ns, const RKMethod& m, double T,
                                              double sigma, double tol) {
    NonlinearConfig cfg;
    cfg.sigma = sigma;
    const auto pair = bound_states(cfg.a, cfg.gamma_linear);
    std::vector<BenchRow> rows;
    for (std::size_t N : Ns) {
        for (EngineKind kind : {EngineKind::fast, EngineKind::direct}) {
            EngineSettings es;
            es.kind = kind;
            es.tol = tol;
            const auto tr = solve_nonlinear(cfg, m, T / static_cast<double>(N), T, pair, es);
            rows.push_back({N, kind, tr.wall_seconds, tr.setup_seconds, tr.n0, tr.N_Q, tr.truncated});
        }
    }
    return rows;
}

/// Least-squares slope of log(seconds) against log(N) for one engine.
inline double loglog_slope(const std::vector<BenchRow>& rows, EngineKind kind) {
    std::vector<double> x, y;
    for (const auto& r : rows) {
        if (r.engine != kind) continue;
        x.push_back(std::log(static_cast<double>(r.N)));
        y.push_back(std::log(std::max(r.seconds, 1e-9)));
    }
    if (x.size() < 2) throw LengthError("loglog_slope: need at least two runs");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace fastcq
