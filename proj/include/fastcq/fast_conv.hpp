#pragma once

// Oblivious evaluation of u_n = sum_{j=0}^{n} W_j f_{n-j}: the last n0+1 lags
// are summed directly, older lags through one scalar recursion per node,
//   Q_{l,k} = r(-h x_k) Q_{l-1,k} + q(-h x_k) f_{l-n0-1},   Q_{n0,k} = 0,
// so that sum_{j>n0} omega_j(d) f_{n-j} ~ sum_k c_k(d) Q_{n,k}.

#include <cstddef>
#include <deque>
#include <numbers>
#include <vector>

#include "fastcq/cq_reference.hpp"
#include "fastcq/errors.hpp"
#include "fastcq/quad_plan.hpp"
#include "fastcq/runge_kutta.hpp"

namespace fastcq {

class FastConvState {
public:
    /// Distances are registered up front so the node prefactors are cached once.
    FastConvState(const QuadraturePlan& plan, const RKMethod& m, const std::vector<double>& distances)
        : s_(m.stages()), n0_(plan.n0), distances_(distances) {
        const std::size_t nq = plan.nodes.size();
        r_.resize(nq);
        q_.resize(nq);
        v_.resize(nq);
        acc_.assign(nq, 0.0);
        for (std::size_t k = 0; k < nq; ++k) {
            const Resolvent res(m, cplx(-plan.h * plan.nodes[k], 0.0));
            r_[k] = res.r();
            q_[k] = res.q();
            v_[k] = res.v();
        }
        const cplx scale = plan.h / (2.0 * std::numbers::pi * I_unit);
        for (double d : distances_) {
            const auto pref = node_prefactors(plan, d);
            std::vector<cplx> last(nq);
            std::vector<cplx> full(nq);
            for (std::size_t k = 0; k < nq; ++k) {
                full[k] = scale * pref[k] * pow_polar(r_[k], n0_);
                last[k] = full[k] * r_[k];
            }
            c_last_.push_back(std::move(last));
            c_full_.push_back(std::move(full));
        }
    }

    [[nodiscard]] int stages() const { return s_; }
    [[nodiscard]] int n0() const { return n0_; }
    [[nodiscard]] std::size_t steps() const { return pushed_; }
    [[nodiscard]] std::size_t node_count() const { return acc_.size(); }
    [[nodiscard]] const std::vector<cplx>& accumulators() const { return acc_; }
    [[nodiscard]] const std::deque<StageVector>& window() const { return ring_; }

    /// Stored s-vectors: the data window plus one accumulator per node.
    [[nodiscard]] std::size_t live_vector_count() const { return static_cast<std::size_t>(n0_ + 1) + acc_.size(); }

    /// Push f_l; once the window is full the vector leaving it feeds the recursion.
    void advance(const StageVector& f_new) {
        if (f_new.size() != s_) throw LengthError("FastConvState::advance: stage vector has the wrong size");
        if (ring_.size() == static_cast<std::size_t>(n0_ + 1)) {
            const StageVector& old = ring_.front();
            for (std::size_t k = 0; k < acc_.size(); ++k) {
                acc_[k] = r_[k] * acc_[k] + (q_[k] * old)(0);
            }
            ring_.pop_front();
        }
        ring_.push_back(f_new);
        ++pushed_;
    }

    /// sum_{j>n0} omega_j(d) f_{n-j} after f_n has been pushed.
    [[nodiscard]] cplx history(double d) const {
        const auto& c = c_last_[index_of(d)];
        cplx sum = 0.0;
        for (std::size_t k = 0; k < acc_.size(); ++k) sum += c[k] * acc_[k];
        return sum;
    }

    /// Full-stage tail sum_{j>n0} W_j(d) f_{n-j} for the step n = steps()
    /// whose data f_n is not yet known; the state is not modified.
    [[nodiscard]] StageVector stage_tail(std::size_t d_index) const {
        const auto& c = c_full_.at(d_index);
        const bool full = ring_.size() == static_cast<std::size_t>(n0_ + 1);
        StageVector out = StageVector::Zero(s_);
        for (std::size_t k = 0; k < acc_.size(); ++k) {
            cplx next = acc_[k];
            if (full) next = r_[k] * next + (q_[k] * ring_.front())(0);
            out += (c[k] * next) * v_[k];
        }
        return out;
    }

    [[nodiscard]] std::size_t index_of(double d) const {
        for (std::size_t i = 0; i < distances_.size(); ++i) {
            if (distances_[i] == d) return i;
        }
        throw DomainError("FastConvState: distance was not registered");
    }

private:
    int s_;
    int n0_;
    std::vector<double> distances_;
    std::vector<cplx> r_;
    std::vector<StageRow> q_;
    std::vector<StageVector> v_;
    std::vector<cplx> acc_;
    std::vector<std::vector<cplx>> c_last_;
    std::vector<std::vector<cplx>> c_full_;
    std::deque<StageVector> ring_;
    std::size_t pushed_ = 0;
};

/// Streaming u_{n} = sum_{j=0}^{n} omega_j f_{n-j}: local weights from the
/// table (lags 0..n0) and the quadrature history for older lags.
inline std::vector<cplx> convolve_full(const QuadraturePlan& plan, const RKMethod& m, const WeightTable& local,
                                       const std::vector<StageVector>& data) {
    if (local.size() < static_cast<std::size_t>(plan.n0 + 1)) {
        throw LengthError("convolve_full: local weight table shorter than n0 + 1");
    }
    FastConvState state(plan, m, {local.d});
    std::vector<cplx> out;
    out.reserve(data.size());
    for (const auto& f : data) {
        state.advance(f);
        const auto& win = state.window();
        cplx u = state.history(local.d);
        const std::size_t w = win.size();
        for (std::size_t j = 0; j < w; ++j) {
            u += (local.omega[j] * win[w - 1 - j])(0);
        }
        out.push_back(u);
    }
    return out;
}

}  // namespace fastcq
