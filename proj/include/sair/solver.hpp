#ifndef SAIR_SOLVER_HPP
#define SAIR_SOLVER_HPP

#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "sair/atoms.hpp"
#include "sair/dictionary_state.hpp"
#include "sair/objective.hpp"

namespace sair
{

///
/// Tunables of the SAIR loop. Zero-valued caps mean "use m".
///
template <typename T>
struct SolverConfig
{
    Index gamma = 8;               ///< grid oversampling factor
    T beta_shrink = T(0.2);        ///< beta_{k+1} = beta_shrink * beta_k
    T beta_floor_factor = T(1e-9); ///< stop annealing at this multiple of beta_0
    std::optional<T> noise_floor;  ///< beta is never annealed below this
    Index max_atoms = 0;           ///< cap on the dictionary size (0: m)
    Index inner_max_adds = 0;      ///< additions per beta stage (0: m)
    Index max_stages = 200;        ///< hard cap on beta stages
    T prune_threshold = T(1e-8);   ///< drop d_j < prune_threshold * max d
    /// Grid candidates must lower L by more than this fraction of L.
    T min_relative_improvement = T(1e-10);
    Index refresh_interval = 64;   ///< incremental updates between refreshes

    // Damped BFGS refinement.
    Index refine_max_iters = 20;
    bool refine_weights = true;   ///< false: refine frequencies only
    T armijo_c1 = T(1e-4);        ///< sufficient-decrease constant
    T backtrack = T(0.5);         ///< step shrink per backtracking trial
    Index max_backtracks = 60;
    T damping = T(0.2);           ///< Powell damping threshold
    T max_freq_step = T(1);       ///< largest frequency move, in units of 1/n
    T max_log_weight_step = T(2); ///< largest change of log d_j per iteration

    void validate() const
    {
        if (gamma < 1)
        {
            throw contract_error("solver config: gamma must be >= 1");
        }
        if (!(beta_shrink > T(0) && beta_shrink < T(1)))
        {
            throw contract_error("solver config: beta_shrink must be in (0,1)");
        }
        if (!(beta_floor_factor > T(0) && beta_floor_factor < T(1)))
        {
            throw contract_error(
                "solver config: beta_floor_factor must be in (0,1)");
        }
        if (noise_floor && !(*noise_floor >= T(0)))
        {
            throw contract_error("solver config: noise_floor must be >= 0");
        }
        if (max_atoms < 0 || inner_max_adds < 0 || max_stages < 1 ||
            refine_max_iters < 0 || refresh_interval < 1 ||
            max_backtracks < 1)
        {
            throw contract_error("solver config: caps must be positive");
        }
        if (!(prune_threshold >= T(0) && prune_threshold < T(1)) ||
            !(min_relative_improvement >= T(0)))
        {
            throw contract_error(
                "solver config: prune_threshold must be in [0,1)");
        }
        if (!(armijo_c1 > T(0) && armijo_c1 < T(1)) ||
            !(backtrack > T(0) && backtrack < T(1)) ||
            !(damping > T(0) && damping < T(1)) || !(max_freq_step > T(0)) ||
            !(max_log_weight_step > T(0)))
        {
            throw contract_error("solver config: invalid line-search constants");
        }
    }
};

struct SolverCounters
{
    Index stages = 0;
    Index additions = 0;
    Index weight_merges = 0; ///< grid picks folded into an existing atom
    Index refine_calls = 0;
    Index refine_iterations = 0;
    Index pruned = 0;
    Index merged = 0; ///< atoms removed by the final duplicate merge
};

template <typename T>
struct Estimate
{
    std::vector<FrequencyAtom<T>> freqs; ///< sorted ascending
    std::vector<std::complex<T>> gains;
    std::vector<T> weights;
    ComplexVector<T> reconstruction; ///< length n
    std::vector<std::pair<T, T>> objective_trace; ///< (beta, L) per stage
    SolverCounters iterations;
    bool cap_overflow = false;
    double runtime_s = 0;
};

//------------------------------------------------------------------------------
// Gains and reconstruction
//------------------------------------------------------------------------------

///
/// Least-squares gains min |y - sum_j s_j phi(f_j)| by column-pivoted QR.
///
template <typename T>
std::vector<std::complex<T>>
recover_gains(const std::vector<FrequencyAtom<T>>& freqs,
              const ComplexVector<T>& y, const MeasurementOperator& op)
{
    if (freqs.empty())
    {
        throw contract_error("recover_gains: need at least one frequency");
    }
    if (y.size() != op.m())
    {
        throw contract_error("recover_gains: y length does not match m");
    }
    const ComplexMatrix<T> Phi = atom_matrix(freqs, op);
    Eigen::ColPivHouseholderQR<ComplexMatrix<T>> qr(Phi);
    if (qr.rank() < Phi.cols())
    {
        throw contract_error(
            "recover_gains: atoms are linearly dependent (rank " +
            std::to_string(qr.rank()) + " < " + std::to_string(Phi.cols()) +
            "); merge duplicate frequencies first");
    }
    const ComplexVector<T> s = qr.solve(y);
    return {s.data(), s.data() + s.size()};
}

/// sum_k gains[k] * steering_vector(freqs[k], n).
template <typename T>
ComplexVector<T> reconstruct(const std::vector<FrequencyAtom<T>>& freqs,
                             const std::vector<std::complex<T>>& gains,
                             Index n)
{
    if (freqs.size() != gains.size())
    {
        throw contract_error("reconstruct: frequency/gain count mismatch");
    }
    ComplexVector<T> x = ComplexVector<T>::Zero(n);
    for (std::size_t k = 0; k < freqs.size(); ++k)
    {
        x += gains[k] * steering_vector(freqs[k], n);
    }
    return x;
}

//------------------------------------------------------------------------------
// Refinement
//------------------------------------------------------------------------------

namespace detail
{

template <typename T>
struct RefineProblem
{
    const SolverConfig<T>& cfg;
    DictionaryState<T> work;
    std::vector<T> fixed_weights;
    Index r;
    Index n;

    Index dim() const
    {
        return cfg.refine_weights ? 2 * r : r;
    }

    RealVector<T> pack(const DictionaryState<T>& s) const
    {
        RealVector<T> x(dim());
        for (Index j = 0; j < r; ++j)
        {
            const auto pos = static_cast<std::size_t>(j);
            x(j) = s.freqs()[pos].value();
            if (cfg.refine_weights)
            {
                x(r + j) = std::log(s.weights()[pos]);
            }
        }
        return x;
    }

    void load(const RealVector<T>& x)
    {
        std::vector<FrequencyAtom<T>> f(static_cast<std::size_t>(r));
        std::vector<T> d = fixed_weights;
        for (Index j = 0; j < r; ++j)
        {
            const auto pos = static_cast<std::size_t>(j);
            f[pos] = FrequencyAtom<T>(x(j));
            if (cfg.refine_weights)
            {
                d[pos] = std::exp(x(r + j));
            }
        }
        work.assign(std::move(f), std::move(d));
    }

    // Objective and gradient at x; false when the point is not usable.
    bool evaluate(const RealVector<T>& x, T& value, RealVector<T>& grad)
    {
        try
        {
            load(x);
        }
        catch (const std::exception&)
        {
            return false;
        }
        value = objective(work);
        const auto g = objective_gradient(work);
        grad.resize(dim());
        grad.head(r) = g.g_f;
        if (cfg.refine_weights)
        {
            grad.tail(r) = g.g_rho;
        }
        return std::isfinite(value) && grad.allFinite();
    }

    // Diagonal inverse-curvature estimate from central differences of the
    // analytic gradient.
    RealVector<T> diagonal_scaling(const RealVector<T>& x,
                                   const RealVector<T>& g0)
    {
        RealVector<T> h(dim());
        RealVector<T> gp, gm;
        T vp = 0, vm = 0;
        for (Index i = 0; i < dim(); ++i)
        {
            const T eps = i < r ? T(1e-4) / static_cast<T>(n) : T(1e-4);
            RealVector<T> xp = x, xm = x;
            xp(i) += eps;
            xm(i) -= eps;
            T curv = 0;
            if (evaluate(xp, vp, gp) && evaluate(xm, vm, gm))
            {
                curv = (gp(i) - gm(i)) / (T(2) * eps);
            }
            curv = std::abs(curv);
            if (!(curv > T(0)) || !std::isfinite(curv))
            {
                curv = std::max(std::abs(g0(i)), T(1));
            }
            h(i) = T(1) / curv;
        }
        return h;
    }
};

} // namespace detail

///
/// Damped BFGS refinement of all frequencies (and log weights unless
/// cfg.refine_weights is false) at the state's beta.
///
/// The inverse-Hessian approximation starts from a finite-difference
/// diagonal, each step is capped and accepted by backtracking under the
/// Armijo condition, and the secant pair is Powell-damped so that
/// s^T r >= damping * s^T B s before the inverse update. L never increases.
///
/// Returns the number of accepted iterations.
///
template <typename T>
Index refine(DictionaryState<T>& state, const SolverConfig<T>& cfg)
{
    if (state.empty())
    {
        throw contract_error("refine: dictionary is empty");
    }
    detail::RefineProblem<T> prob{cfg, state, state.weights(), state.size(),
                                  state.op().n()};
    const Index dim = prob.dim();
    const Index r = prob.r;

    RealVector<T> x = prob.pack(state);
    T value = 0;
    RealVector<T> grad;
    if (!prob.evaluate(x, value, grad))
    {
        state.refresh();
        return 0;
    }
    const RealVector<T> h0 = prob.diagonal_scaling(x, grad);
    RealMatrix<T> H = h0.asDiagonal();

    const T max_df = cfg.max_freq_step / static_cast<T>(prob.n);
    Index accepted_iters = 0;
    RealVector<T> x_new, g_new;
    T v_new = 0;
    for (Index it = 0; it < cfg.refine_max_iters; ++it)
    {
        RealVector<T> p = -(H * grad);
        T slope = grad.dot(p);
        if (!(slope < T(0)))
        {
            H = h0.asDiagonal();
            p = -(H * grad);
            slope = grad.dot(p);
            if (!(slope < T(0)))
            {
                break;
            }
        }
        T cap = 1;
        for (Index i = 0; i < dim; ++i)
        {
            const T lim = i < r ? max_df : cfg.max_log_weight_step;
            if (std::abs(p(i)) * cap > lim)
            {
                cap = lim / std::abs(p(i));
            }
        }
        p *= cap;
        slope *= cap;

        T alpha = 1;
        bool ok = false;
        for (Index bt = 0; bt < cfg.max_backtracks; ++bt)
        {
            x_new = x + alpha * p;
            if (prob.evaluate(x_new, v_new, g_new) &&
                v_new <= value + cfg.armijo_c1 * alpha * slope)
            {
                ok = true;
                break;
            }
            alpha *= cfg.backtrack;
        }
        if (!ok)
        {
            break;
        }

        const RealVector<T> s = x_new - x;
        const RealVector<T> yv = g_new - grad;
        const T decrease = value - v_new;
        x = x_new;
        grad = g_new;
        value = v_new;
        ++accepted_iters;

        const RealVector<T> Bs = H.ldlt().solve(s);
        const T sBs = s.dot(Bs);
        const T sy = s.dot(yv);
        if (!(sBs > T(0)) || !std::isfinite(sBs))
        {
            H = h0.asDiagonal();
        }
        else
        {
            T theta = 1;
            if (sy < cfg.damping * sBs)
            {
                theta = (T(1) - cfg.damping) * sBs / (sBs - sy);
            }
            const RealVector<T> rv = theta * yv + (T(1) - theta) * Bs;
            const T rho = T(1) / s.dot(rv);
            const RealMatrix<T> V =
                RealMatrix<T>::Identity(dim, dim) - rho * rv * s.transpose();
            H = (V.transpose() * H * V).eval();
            H.noalias() += rho * s * s.transpose();
            H = (T(0.5) * (H + H.transpose())).eval();
        }

        if (decrease <= std::numeric_limits<T>::epsilon() *
                            std::max(T(1), std::abs(value)))
        {
            break;
        }
    }

    if (accepted_iters > 0)
    {
        prob.load(x);
        state = std::move(prob.work);
    }
    else
    {
        state.refresh();
    }
    return accepted_iters;
}

///
/// One cyclic pass of leave-one-out weight re-estimation: every atom is
/// removed, its quadratics are evaluated against the remaining covariance
/// and it is re-inserted with the optimal weight (|q| - 1)/s, or left out
/// when |q| <= 1. Atoms whose weight ends below prune_threshold times the
/// largest weight are dropped. Atom order is preserved.
///
/// Returns the number of atoms removed.
///
template <typename T>
Index reestimate_and_prune(DictionaryState<T>& state,
                           const SolverConfig<T>& cfg)
{
    const Index r0 = state.size();
    for (Index k = 0; k < r0; ++k)
    {
        const FrequencyAtom<T> f = state.freqs().front();
        state.remove_atom(0);
        const auto score = optimal_weight(f, state);
        if (score.d_hat > T(0))
        {
            state.add_atom(f, score.d_hat);
        }
    }
    if (!state.empty() && cfg.prune_threshold > T(0))
    {
        const T dmax =
            *std::max_element(state.weights().begin(), state.weights().end());
        for (Index j = state.size() - 1; j >= 0; --j)
        {
            if (state.weights()[static_cast<std::size_t>(j)] <
                cfg.prune_threshold * dmax)
            {
                state.remove_atom(j);
            }
        }
    }
    // The pass mixes many rank-one updates; leave exact caches behind.
    state.refresh();
    return r0 - state.size();
}

namespace detail
{

template <typename T>
std::optional<Index> nearest_atom(const DictionaryState<T>& state,
                                  FrequencyAtom<T> f, T radius)
{
    std::optional<Index> best;
    T best_dist = radius;
    for (Index j = 0; j < state.size(); ++j)
    {
        const T dist = wrap_distance(
            state.freqs()[static_cast<std::size_t>(j)].value(), f.value());
        if (dist < best_dist)
        {
            best = j;
            best_dist = dist;
        }
    }
    return best;
}

// Removes the lighter atom of every pair closer than `radius`; returns the
// number removed.
template <typename T>
Index merge_close_atoms(DictionaryState<T>& state, T radius)
{
    Index merged = 0;
    for (;;)
    {
        const Index r = state.size();
        std::optional<Index> victim;
        for (Index i = 0; i < r && !victim; ++i)
        {
            for (Index j = i + 1; j < r; ++j)
            {
                const auto pi = static_cast<std::size_t>(i);
                const auto pj = static_cast<std::size_t>(j);
                if (wrap_distance(state.freqs()[pi].value(),
                                  state.freqs()[pj].value()) < radius)
                {
                    victim = state.weights()[pi] < state.weights()[pj] ? i : j;
                    break;
                }
            }
        }
        if (!victim)
        {
            return merged;
        }
        state.remove_atom(*victim);
        ++merged;
    }
}

} // namespace detail

///
/// ### sair_run
///
/// Sequential atom identification and refinement. Starting from an empty
/// dictionary and C = beta_0 I with beta_0 = |y| / m, each beta stage
/// repeatedly adds the best grid atom (when it lowers L), refines the
/// dictionary and re-estimates the weights, until no grid atom improves L.
/// beta then shrinks geometrically until it reaches the floor
/// max(beta_floor_factor beta_0, noise_floor) and a stage adds nothing.
/// Finally, near-duplicate atoms are merged, gains are fitted by least
/// squares and the full-length signal is reconstructed.
///
template <typename T>
Estimate<T> sair_run(const ComplexVector<T>& y, const MeasurementOperator& op,
                     const SolverConfig<T>& cfg = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    if (y.size() != op.m())
    {
        throw contract_error("sair_run: y length (" + std::to_string(y.size()) +
                             ") does not match operator m (" +
                             std::to_string(op.m()) + ")");
    }
    check_signal(y, "sair_run: y");

    Estimate<T> est;
    est.reconstruction = ComplexVector<T>::Zero(op.n());
    const T ynorm = y.norm();
    if (ynorm == T(0))
    {
        est.runtime_s = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        return est;
    }

    const Index m = op.m();
    const Index grid_size = cfg.gamma * op.n();
    const Index max_atoms = cfg.max_atoms > 0 ? cfg.max_atoms : m;
    const Index max_adds = cfg.inner_max_adds > 0 ? cfg.inner_max_adds : m;
    const T beta0 = ynorm / static_cast<T>(m);
    const T floor =
        std::max(cfg.beta_floor_factor * beta0, cfg.noise_floor.value_or(T(0)));
    const T duplicate_radius = T(1e-4) / static_cast<T>(grid_size);

    T beta = std::max(beta0, floor);
    DictionaryState<T> state(y, op, beta, cfg.refresh_interval);
    auto& ctr = est.iterations;

    auto polish = [&]() {
        if (state.empty())
        {
            return;
        }
        ++ctr.refine_calls;
        ctr.refine_iterations += refine(state, cfg);
        ctr.pruned += reestimate_and_prune(state, cfg);
    };

    for (Index stage = 0; stage < cfg.max_stages; ++stage)
    {
        ++ctr.stages;
        if (stage > 0)
        {
            polish();
        }
        Index added = 0;
        Index effective = 0;
        while (added < max_adds)
        {
            const T before = objective(state);
            const T tol = cfg.min_relative_improvement * std::abs(before);
            const auto cand = select_candidate(state, cfg.gamma);
            if (!cand || -cand->delta <= tol)
            {
                break;
            }
            if (const auto j =
                    detail::nearest_atom(state, cand->f, duplicate_radius))
            {
                state.update_weight(
                    *j, state.weights()[static_cast<std::size_t>(*j)] +
                            cand->d_hat);
                ++ctr.weight_merges;
            }
            else if (state.size() >= max_atoms)
            {
                est.cap_overflow = true;
                break;
            }
            else
            {
                state.add_atom(cand->f, cand->d_hat);
                ++ctr.additions;
            }
            ++added;
            polish();
            // An addition that polishing undid (roundoff-level residual
            // structure) ends the stage.
            if (before - objective(state) <= tol)
            {
                break;
            }
            ++effective;
        }
        est.objective_trace.emplace_back(beta, objective(state));
        if (beta <= floor && effective == 0)
        {
            break;
        }
        beta = std::max(beta * cfg.beta_shrink, floor);
        state.set_beta(beta);
    }

    const T merge_radius = T(1) / (T(2) * static_cast<T>(grid_size));
    const Index merged = detail::merge_close_atoms(state, merge_radius);
    ctr.merged += merged;
    if (merged > 0 && !state.empty())
    {
        ++ctr.refine_calls;
        ctr.refine_iterations += refine(state, cfg);
    }

    const Index r = state.size();
    std::vector<Index> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return state.freqs()[static_cast<std::size_t>(a)] <
               state.freqs()[static_cast<std::size_t>(b)];
    });
    for (Index j : order)
    {
        est.freqs.push_back(state.freqs()[static_cast<std::size_t>(j)]);
        est.weights.push_back(state.weights()[static_cast<std::size_t>(j)]);
    }
    if (r > 0)
    {
        est.gains = recover_gains(est.freqs, y, op);
        est.reconstruction = reconstruct(est.freqs, est.gains, op.n());
    }
    est.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return est;
}

} // namespace sair

#endif // SAIR_SOLVER_HPP
