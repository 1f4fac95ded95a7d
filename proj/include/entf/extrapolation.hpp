// Tensor-sequence convergence acceleration: reduced-rank extrapolation and
// the topological transformation, plus the restart drivers that wrap the
// multiplicative-update solver.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "entf/linalg.hpp"
#include "entf/solver.hpp"
#include "entf/tensor.hpp"

namespace entf {

/// Buffer of same-shape iterates in insertion order; pushing onto a full
/// window drops the oldest iterate.
class IterateWindow {
public:
    explicit IterateWindow(std::size_t capacity) : capacity_(capacity) {
        if (capacity < 1)
            throw Error("window: capacity must be at least 1");
    }

    void push(DenseTensor t) {
        if (!iterates_.empty())
            require_same_shape(iterates_.front(), t, "window push");
        if (iterates_.size() == capacity_)
            iterates_.erase(iterates_.begin());
        iterates_.push_back(std::move(t));
    }

    std::size_t size() const { return iterates_.size(); }
    std::size_t capacity() const { return capacity_; }
    const DenseTensor& operator[](std::size_t i) const { return iterates_[i]; }
    void clear() { iterates_.clear(); }

private:
    std::size_t capacity_;
    std::vector<DenseTensor> iterates_;
};

enum class ExtrapMethod { Rre, Tet };
enum class TetProbe { FirstDifference, RandomSeeded };

struct ExtrapConfig {
    std::size_t order = 3;                        // k
    ExtrapMethod method = ExtrapMethod::Rre;
    TetProbe probe = TetProbe::FirstDifference;
    std::uint64_t probe_seed = 0;                 // for the random probe
    bool restart_clamp = true;                    // clamp extrapolants at 0
    bool literal_tet_rhs = false;                 // use <W, d2X> on the rhs

    void validate() const {
        if (order < 1)
            throw Error("extrap: order must be at least 1");
    }

    /// Base solver sweeps collected per restart cycle: the cycle's starting
    /// state plus this many steps form the extrapolation window.
    std::size_t cycle_steps() const {
        return method == ExtrapMethod::Rre ? order + 1 : 2 * order;
    }
};

inline std::vector<DenseTensor> differences(const IterateWindow& window) {
    if (window.size() < 2)
        throw Error("differences: window must hold at least 2 iterates");
    std::vector<DenseTensor> d;
    d.reserve(window.size() - 1);
    for (std::size_t i = 0; i + 1 < window.size(); ++i)
        d.push_back(sub(window[i + 1], window[i]));
    return d;
}

inline std::vector<DenseTensor> second_differences(const IterateWindow& window) {
    if (window.size() < 3)
        throw Error("second_differences: window must hold at least 3 iterates");
    std::vector<DenseTensor> d;
    d.reserve(window.size() - 2);
    for (std::size_t i = 0; i + 2 < window.size(); ++i)
        d.push_back(add(sub(window[i + 2], scale(window[i + 1], 2.0)), window[i]));
    return d;
}

struct Extrapolant {
    DenseTensor value;
    double residual;
};

/// Reduced-rank extrapolation over a window of m >= 3 iterates: gamma
/// solves min ||[d2X_n ... d2X_{n+q-1}] x_{N+1} gamma - dX_n||_F with
/// q = m - 2, and T = X_n - [dX_n ... dX_{n+q-1}] x_{N+1} gamma.
/// A stagnated window (dependent difference columns) yields nullopt.
inline std::optional<Extrapolant> rre(const IterateWindow& window) {
    if (window.size() < 3)
        throw Error("rre: window must hold at least 3 iterates");
    const std::size_t q = window.size() - 2;
    const std::vector<DenseTensor> d = differences(window);
    const std::vector<DenseTensor> dd = second_differences(window);

    LstsqResult ls{{}, 0.0};
    try {
        ls = lstsq_tensor_columns(stack_last(dd), d[0]);
    } catch (const RankDeficiencyError&) {
        return std::nullopt;
    }

    std::vector<DenseTensor> dcols(d.begin(), d.begin() + q);
    const DenseTensor gamma({q}, std::move(ls.gamma));
    const DenseTensor stacked = stack_last(dcols);
    DenseTensor value = sub(window[0], nmode_product_vector(stacked, gamma, stacked.order()));
    return Extrapolant{std::move(value), ls.residual};
}

/// Topological extrapolation of order k over the first 2k+1 iterates of the
/// window. The k x k system has A_ij = <probe, d2X_{n+i+j-2}> and rhs
/// b_i = <probe, dX_{n+i-1}> (set literal_rhs to use second differences on
/// the rhs instead). A singular system yields nullopt.
inline std::optional<Extrapolant> tet(const IterateWindow& window, std::size_t k,
                                      const DenseTensor& probe, bool literal_rhs = false) {
    if (k < 1)
        throw Error("tet: order must be at least 1");
    if (window.size() < 2 * k + 1)
        throw Error("tet: window of " + std::to_string(window.size()) +
                    " iterates is too short for order " + std::to_string(k));
    require_same_shape(window[0], probe, "tet probe");

    const std::vector<DenseTensor> d = differences(window);
    const std::vector<DenseTensor> dd = second_differences(window);

    DenseTensor hankel({k, k});
    DenseTensor rhs({k});
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j)
            hankel(i, j) = inner_product(probe, dd[i + j]);
        rhs(i) = inner_product(probe, literal_rhs ? dd[i] : d[i]);
    }

    LstsqResult ls{{}, 0.0};
    try {
        ls = lstsq_tensor_columns(hankel, rhs);
    } catch (const RankDeficiencyError&) {
        return std::nullopt;
    }

    std::vector<DenseTensor> dcols(d.begin(), d.begin() + k);
    const DenseTensor gamma({k}, std::move(ls.gamma));
    const DenseTensor stacked = stack_last(dcols);
    DenseTensor value = sub(window[0], nmode_product_vector(stacked, gamma, stacked.order()));
    return Extrapolant{std::move(value), ls.residual};
}

namespace detail {

inline DenseTensor tet_probe_for(const IterateWindow& window, const ExtrapConfig& ex) {
    if (ex.probe == TetProbe::RandomSeeded)
        return DenseTensor::random_uniform(window[0].shape(), ex.probe_seed, -1.0, 1.0);
    return sub(window[1], window[0]);
}

inline std::optional<Extrapolant> extrapolate_window(const IterateWindow& window,
                                                     const ExtrapConfig& ex) {
    if (ex.method == ExtrapMethod::Rre)
        return rre(window);
    return tet(window, ex.order, tet_probe_for(window, ex), ex.literal_tet_rhs);
}

}  // namespace detail

/// Restarted solver: each cycle collects cycle_steps() base sweeps, then
/// extrapolates the x and y sequences independently and restarts from the
/// (clamped) extrapolants. A restart is accepted only when it does not
/// increase the objective; failures fall back to plain sweeps. The result's
/// iteration count is the total number of base sweeps consumed.
inline EntfResult run_extrapolated(const DenseTensor& a, const EntfConfig& cfg,
                                   const ExtrapConfig& ex, const StepObserver& observer = {}) {
    cfg.validate();
    ex.validate();
    require_nonnegative_cube(a);
    const DenseTensor work = cfg.gamma_asc > 0.0 ? augment_cube(a, cfg.gamma_asc) : a;
    detail::check_rank_x(work, cfg);

    EntfState state = init_state(work, cfg);
    std::optional<TraceWriter> trace;
    if (!cfg.trace_path.empty())
        trace.emplace(cfg.trace_path);
    TraceWriter* tr = trace ? &*trace : nullptr;

    const std::size_t window_len = ex.cycle_steps() + 1;
    bool converged = false;
    std::size_t cycle = 0;

    while (!converged && state.iter < cfg.max_iter) {
        ++cycle;
        IterateWindow wx(window_len);
        IterateWindow wy(window_len);
        wx.push(state.x);
        wy.push(state.y);

        const std::size_t budget = std::min(ex.cycle_steps(), cfg.max_iter - state.iter);
        for (std::size_t n = 0; n < budget && !converged; ++n) {
            entf_step(state, work, cfg);
            if (tr)
                tr->row(state.iter, state.objective_history.back(), state.rel_change_x,
                        state.rel_change_y);
            if (observer)
                observer(state);
            wx.push(state.x);
            wy.push(state.y);
            converged = state.rel_change_x <= cfg.eps_stop && state.rel_change_y <= cfg.eps_stop;
        }
        if (converged || wx.size() < window_len)
            break;

        const auto tx = detail::extrapolate_window(wx, ex);
        const auto ty = detail::extrapolate_window(wy, ex);
        if (!tx || !ty) {
            if (tr)
                tr->cycle(cycle, 0.0, false);
            continue;
        }

        EntfState candidate = state;
        candidate.x = ex.restart_clamp ? detail::clamp_nonnegative(tx->value) : tx->value;
        candidate.y = ex.restart_clamp ? detail::clamp_nonnegative(ty->value) : ty->value;
        detail::pin_asc_row(candidate.x, cfg);
        candidate.p = prox_l1(candidate.y, cfg.prox_threshold());
        candidate.q = update_q(candidate.x, cfg.rank_x);

        const double residual = std::max(tx->residual, ty->residual);
        const bool accepted = objective(work, candidate, cfg) <= objective(work, state, cfg);
        if (tr)
            tr->cycle(cycle, residual, accepted);
        if (accepted)
            state = std::move(candidate);
    }
    return detail::finish(std::move(state), converged, cfg.gamma_asc);
}

inline EntfResult entf_rre(const DenseTensor& a, const EntfConfig& cfg, ExtrapConfig ex,
                           const StepObserver& observer = {}) {
    ex.method = ExtrapMethod::Rre;
    return run_extrapolated(a, cfg, ex, observer);
}

inline EntfResult entf_tet(const DenseTensor& a, const EntfConfig& cfg, ExtrapConfig ex,
                           const StepObserver& observer = {}) {
    ex.method = ExtrapMethod::Tet;
    return run_extrapolated(a, cfg, ex, observer);
}

}  // namespace entf
