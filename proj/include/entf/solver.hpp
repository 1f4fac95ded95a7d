// Nonnegative factorization of a hyperspectral cube a (I x J x K) into
// endmembers x (I x r) and abundances y (r x J x K) under the contracted
// product, by Gauss-Seidel multiplicative updates with an l1 proximal
// surrogate for y and a low-rank proximity target for x.

#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "entf/linalg.hpp"
#include "entf/tensor.hpp"

namespace entf {

struct EntfConfig {
    std::size_t r = 3;          // endmember count
    double lambda_s = 0.0;      // sparsity weight on the y surrogate
    double lambda_x = 0.0;      // low-rank proximity weight on x
    double lambda_y = 0.0;      // sparsity proximity weight on y
    std::size_t rank_x = 1;     // estimated rank of x, used by the q step
    double gamma_asc = 0.0;     // sum-to-one augmentation weight, 0 disables
    double eps_stop = 1e-8;     // relative-change stopping tolerance
    std::size_t max_iter = 500;
    double eps_div = 1e-12;     // denominator guard for the updates
    std::uint64_t seed = 0;     // initialization seed
    std::string trace_path;     // per-iteration CSV trace, empty disables

    void validate() const {
        if (r < 1)
            throw Error("config: r must be at least 1");
        if (lambda_s < 0.0 || lambda_x < 0.0 || lambda_y < 0.0)
            throw Error("config: regularization weights must be nonnegative");
        if (lambda_s > 0.0 && lambda_y <= 0.0)
            throw Error("config: lambda_y must be positive when lambda_s is positive");
        if (rank_x < 1)
            throw Error("config: rank_x must be at least 1");
        if (gamma_asc < 0.0)
            throw Error("config: gamma_asc must be nonnegative");
        if (!(eps_stop > 0.0))
            throw Error("config: eps_stop must be positive");
        if (max_iter < 1)
            throw Error("config: max_iter must be at least 1");
        if (!(eps_div > 0.0))
            throw Error("config: eps_div must be positive");
    }

    double prox_threshold() const { return lambda_s > 0.0 ? lambda_s / lambda_y : 0.0; }
};

struct EntfState {
    DenseTensor x;
    DenseTensor y;
    DenseTensor p;
    DenseTensor q;
    std::size_t iter = 0;
    double rel_change_x = 0.0;
    double rel_change_y = 0.0;
    std::vector<double> objective_history;
};

struct EntfResult {
    DenseTensor x;
    DenseTensor y;
    bool converged = false;
    std::size_t iterations = 0;
    DenseTensor reconstruction;
    std::vector<double> objective_history;
};

using StepObserver = std::function<void(const EntfState&)>;

/// Sparsity weight from the band-wise l1/Frobenius ratios:
/// lambda_s = sum_i (sqrt(JK) - |a(i,:,:)|_1 / |a(i,:,:)|_F) / ((sqrt(JK)-1) sqrt(I)),
/// always in [0, sqrt(I)]. An all-zero band contributes 0.
inline double compute_lambda_s(const DenseTensor& a) {
    if (a.order() != 3)
        throw ShapeError("compute_lambda_s: expected an I x J x K cube, got " +
                         detail::shape_str(a.shape()));
    const std::size_t bands = a.extent(0);
    const std::size_t jk = a.extent(1) * a.extent(2);
    if (jk == 1)
        throw Error("compute_lambda_s: degenerate single-pixel cube (J*K = 1)");

    const double sqrt_jk = std::sqrt(static_cast<double>(jk));
    const double sqrt_i = std::sqrt(static_cast<double>(bands));
    const auto ad = a.data();
    double total = 0.0;
    for (std::size_t i = 0; i < bands; ++i) {
        double l1 = 0.0;
        double sq = 0.0;
        for (std::size_t t = 0; t < jk; ++t) {
            const double v = ad[i * jk + t];
            l1 += std::abs(v);
            sq += v * v;
        }
        if (sq == 0.0)
            continue;
        total += (sqrt_jk - l1 / std::sqrt(sq)) / ((sqrt_jk - 1.0) * sqrt_i);
    }
    return total;
}

namespace detail {

inline DenseTensor clamp_nonnegative(DenseTensor t) {
    for (double& v : t.data())
        v = std::max(0.0, v);
    return t;
}

inline double relative_change(const DenseTensor& current, const DenseTensor& previous) {
    const double prev_norm = frobenius_norm(previous);
    const double diff_norm = frobenius_norm(sub(current, previous));
    if (prev_norm == 0.0)
        return diff_norm == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff_norm / prev_norm;
}

// With augmentation active, x is the augmented factor and its appended row
// stays structurally pinned at gamma; fitting the appended gamma band then
// pushes the per-pixel abundance sums toward 1.
inline void pin_asc_row(DenseTensor& x, const EntfConfig& cfg) {
    if (cfg.gamma_asc <= 0.0)
        return;
    const std::size_t r = x.extent(1);
    double* last_row = x.data().data() + (x.extent(0) - 1) * r;
    std::fill(last_row, last_row + r, cfg.gamma_asc);
}

}  // namespace detail

/// Multiplicative update for x:
/// x <- max(0, x .* (a *_2 y^T) ./ (x *_1 y *_2 y^T + lambda_x (x - q))).
inline DenseTensor update_x(const EntfState& state, const DenseTensor& a,
                            const EntfConfig& cfg) {
    const DenseTensor yt = group_transpose(state.y, 1);
    const DenseTensor num = einstein_product(a, yt, 2);
    DenseTensor den = einstein_product(einstein_product(state.x, state.y, 1), yt, 2);
    if (cfg.lambda_x > 0.0)
        den = add(den, scale(sub(state.x, state.q), cfg.lambda_x));
    return detail::clamp_nonnegative(hadamard(state.x, hadamard_div(num, den, cfg.eps_div)));
}

/// Multiplicative update for y, with x already advanced this sweep:
/// y <- max(0, y .* (x^T *_1 a) ./ (x^T *_1 x *_1 y + lambda_y (y - p))).
inline DenseTensor update_y(const EntfState& state, const DenseTensor& a,
                            const EntfConfig& cfg) {
    const DenseTensor xt = group_transpose(state.x, 1);
    const DenseTensor num = einstein_product(xt, a, 1);
    DenseTensor den = einstein_product(einstein_product(xt, state.x, 1), state.y, 1);
    if (cfg.lambda_y > 0.0)
        den = add(den, scale(sub(state.y, state.p), cfg.lambda_y));
    return detail::clamp_nonnegative(hadamard(state.y, hadamard_div(num, den, cfg.eps_div)));
}

/// Entrywise soft threshold max(|y| - threshold, 0) .* sgn(y), the l1
/// proximal operator.
inline DenseTensor prox_l1(const DenseTensor& y, double threshold) {
    if (threshold < 0.0)
        throw Error("prox_l1: threshold must be nonnegative");
    DenseTensor out(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double m = std::abs(y[i]) - threshold;
        out[i] = m > 0.0 ? std::copysign(m, y[i]) : 0.0;
    }
    return out;
}

/// Proximity target for x: its best rank-`rank_x` approximation. Left
/// unclamped; it only enters the x update as a target.
inline DenseTensor update_q(const DenseTensor& x, std::size_t rank_x) {
    return truncated_svd(x, rank_x);
}

/// Sum-to-one augmentation: appends the band gamma * ones(J, K) to the cube
/// and the row gamma * 1_r to the endmembers.
inline DenseTensor augment_cube(const DenseTensor& a, double gamma_asc) {
    if (a.order() != 3)
        throw ShapeError("augment_cube: expected an I x J x K cube");
    DenseTensor out({a.extent(0) + 1, a.extent(1), a.extent(2)});
    std::copy(a.data().begin(), a.data().end(), out.data().begin());
    std::fill(out.data().begin() + a.size(), out.data().end(), gamma_asc);
    return out;
}

inline DenseTensor augment_endmembers(const DenseTensor& x, double gamma_asc) {
    if (x.order() != 2)
        throw ShapeError("augment_endmembers: expected an I x r tensor");
    DenseTensor out({x.extent(0) + 1, x.extent(1)});
    std::copy(x.data().begin(), x.data().end(), out.data().begin());
    std::fill(out.data().begin() + x.size(), out.data().end(), gamma_asc);
    return out;
}

inline std::pair<DenseTensor, DenseTensor> augment_for_asc(const DenseTensor& a,
                                                           const DenseTensor& x,
                                                           double gamma_asc) {
    if (!(gamma_asc > 0.0))
        throw Error("augment_for_asc: gamma_asc must be positive");
    return {augment_cube(a, gamma_asc), augment_endmembers(x, gamma_asc)};
}

/// Drops the augmentation row appended by augment_endmembers.
inline DenseTensor strip_asc_row(const DenseTensor& x) {
    if (x.order() != 2 || x.extent(0) < 2)
        throw ShapeError("strip_asc_row: expected an (I+1) x r tensor");
    DenseTensor out({x.extent(0) - 1, x.extent(1)});
    std::copy(x.data().begin(), x.data().begin() + out.size(), out.data().begin());
    return out;
}

/// Default augmentation weight for unmixing runs: 25 * max(a).
inline double auto_gamma_asc(const DenseTensor& a) { return 25.0 * max_value(a); }

inline double objective(const DenseTensor& a, const EntfState& state, const EntfConfig& cfg) {
    const double fit = frobenius_norm(sub(a, einstein_product(state.x, state.y, 1)));
    double value = 0.5 * fit * fit;
    if (cfg.lambda_s > 0.0)
        value += cfg.lambda_s * l1_norm(state.p);
    if (cfg.lambda_y > 0.0) {
        const double dy = frobenius_norm(sub(state.y, state.p));
        value += 0.5 * cfg.lambda_y * dy * dy;
    }
    if (cfg.lambda_x > 0.0) {
        const double dx = frobenius_norm(sub(state.x, state.q));
        value += 0.5 * cfg.lambda_x * dx * dx;
    }
    return value;
}

inline void require_nonnegative_cube(const DenseTensor& a) {
    if (a.order() != 3)
        throw ShapeError("entf: expected an I x J x K cube, got " +
                         detail::shape_str(a.shape()));
    for (double v : a.data())
        if (v < 0.0)
            throw Error("entf: input cube has negative entries");
}

/// Uniform (eps_div, 1] initialization of the iterates for the cube the
/// solver will factorize; p and q start as copies of y and x.
inline EntfState init_state(const DenseTensor& a, const EntfConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    DenseTensor x({a.extent(0), cfg.r});
    for (double& v : x.data())
        v = detail::uniform_open_closed(rng, cfg.eps_div, 1.0);
    DenseTensor y({cfg.r, a.extent(1), a.extent(2)});
    for (double& v : y.data())
        v = detail::uniform_open_closed(rng, cfg.eps_div, 1.0);
    detail::pin_asc_row(x, cfg);
    DenseTensor p = y;
    DenseTensor q = x;
    return {std::move(x), std::move(y), std::move(p), std::move(q), 0, 0.0, 0.0, {}};
}

/// One Gauss-Seidel sweep in the order x, y, p, q. Records the relative
/// changes and appends the objective to the state history.
inline void entf_step(EntfState& state, const DenseTensor& a, const EntfConfig& cfg) {
    const DenseTensor x_prev = state.x;
    const DenseTensor y_prev = state.y;
    try {
        state.x = update_x(state, a, cfg);
        detail::pin_asc_row(state.x, cfg);
        state.y = update_y(state, a, cfg);
        state.p = prox_l1(state.y, cfg.prox_threshold());
        state.q = update_q(state.x, cfg.rank_x);
    } catch (const Error& e) {
        throw Error("entf: iteration " + std::to_string(state.iter + 1) +
                    " produced an invalid state: " + e.what());
    }
    state.iter += 1;
    state.rel_change_x = detail::relative_change(state.x, x_prev);
    state.rel_change_y = detail::relative_change(state.y, y_prev);
    state.objective_history.push_back(objective(a, state, cfg));
}

/// Append-style writer for the iteration trace CSV; extrapolation drivers
/// add per-cycle comment rows so the four-column schema stays parseable.
class TraceWriter {
public:
    explicit TraceWriter(const std::string& path) : out_(path, std::ios::trunc) {
        if (!out_)
            throw Error("trace: cannot open '" + path + "' for writing");
        out_ << "iter,objective,rel_change_x,rel_change_y\n";
    }

    void row(std::size_t iter, double obj, double rx, double ry) {
        out_.precision(17);
        out_ << iter << ',' << obj << ',' << rx << ',' << ry << '\n';
    }

    void cycle(std::size_t index, double residual, bool accepted) {
        out_.precision(17);
        out_ << "# cycle," << index << ',' << residual << ','
             << (accepted ? "accepted" : "rejected") << '\n';
    }

private:
    std::ofstream out_;
};

namespace detail {

inline void check_rank_x(const DenseTensor& work, const EntfConfig& cfg) {
    const std::size_t full = std::min(work.extent(0), cfg.r);
    if (cfg.rank_x > full)
        throw Error("config: rank_x " + std::to_string(cfg.rank_x) + " exceeds min(I, r) = " +
                    std::to_string(full));
}

// Runs up to max_steps sweeps; true once both relative changes are within
// eps_stop.
inline bool run_sweeps(EntfState& state, const DenseTensor& work, const EntfConfig& cfg,
                       std::size_t max_steps, TraceWriter* trace, const StepObserver& observer) {
    for (std::size_t n = 0; n < max_steps; ++n) {
        entf_step(state, work, cfg);
        if (trace)
            trace->row(state.iter, state.objective_history.back(), state.rel_change_x,
                       state.rel_change_y);
        if (observer)
            observer(state);
        if (state.rel_change_x <= cfg.eps_stop && state.rel_change_y <= cfg.eps_stop)
            return true;
    }
    return false;
}

inline EntfResult finish(EntfState state, bool converged, double gamma_asc) {
    DenseTensor x = gamma_asc > 0.0 ? strip_asc_row(state.x) : std::move(state.x);
    DenseTensor recon = einstein_product(x, state.y, 1);
    return {std::move(x), std::move(state.y), converged,
            state.iter,   std::move(recon),   std::move(state.objective_history)};
}

}  // namespace detail

/// Full solve: optional sum-to-one augmentation, seeded initialization,
/// sweeps until both relative changes fall within eps_stop or max_iter.
/// The returned x is stripped back to I x r when augmentation was active.
inline EntfResult run_entf(const DenseTensor& a, const EntfConfig& cfg,
                           const StepObserver& observer = {}) {
    cfg.validate();
    require_nonnegative_cube(a);
    const DenseTensor work = cfg.gamma_asc > 0.0 ? augment_cube(a, cfg.gamma_asc) : a;
    detail::check_rank_x(work, cfg);

    EntfState state = init_state(work, cfg);
    std::optional<TraceWriter> trace;
    if (!cfg.trace_path.empty())
        trace.emplace(cfg.trace_path);
    const bool converged = detail::run_sweeps(state, work, cfg, cfg.max_iter,
                                              trace ? &*trace : nullptr, observer);
    return detail::finish(std::move(state), converged, cfg.gamma_asc);
}

}  // namespace entf
