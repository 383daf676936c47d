#ifndef SAIR_OBJECTIVE_HPP
#define SAIR_OBJECTIVE_HPP

#include <optional>

#include "sair/atoms.hpp"
#include "sair/dictionary_state.hpp"

namespace sair
{

/// Best weight for a candidate atom and the objective change it buys.
/// delta < 0 iff d_hat > 0 iff |q| > 1.
template <typename T>
struct CandidateScore
{
    FrequencyAtom<T> f;
    T d_hat = 0;
    T delta = 0;
};

template <typename T>
struct ObjectiveGradient
{
    RealVector<T> g_f;   ///< dL/df_j
    RealVector<T> g_rho; ///< dL/drho_j with d_j = exp(rho_j)
};

/// L = 1/2 sum_j d_j + 1/2 y^H C^{-1} y at the state's beta.
template <typename T>
T objective(const DictionaryState<T>& state)
{
    T sum_d = 0;
    for (T d : state.weights())
    {
        sum_d += d;
    }
    return T(0.5) * sum_d + T(0.5) * state.quadratic_form();
}

/// Change of L when adding atom f with weight d:
/// 1/2 (d - |q|^2 / (1/d + s)).
template <typename T>
T delta_objective(FrequencyAtom<T> f, T d, const DictionaryState<T>& state)
{
    if (!(d > T(0)))
    {
        throw contract_error("delta_objective: weight must be positive");
    }
    const auto qs = state.quadratics(f);
    return T(0.5) * (d - std::norm(qs.q) / (T(1) / d + qs.s));
}

///
/// Minimizer of d -> 1/2 (d - d |q|^2 / (1 + d s)) over d >= 0.
///
/// The derivative 1/2 (1 - |q|^2 / (1 + d s)^2) vanishes at 1 + d s = |q|,
/// which is admissible only for |q| > 1; there
///
///     d_hat = (|q| - 1) / s,   delta = -(|q| - 1)^2 / (2 s).
///
template <typename T>
CandidateScore<T> score_candidate(FrequencyAtom<T> f, std::complex<T> q, T s)
{
    const T a = std::abs(q);
    if (!(a > T(1)) || !(s > T(0)))
    {
        return {f, T(0), T(0)};
    }
    const T excess = a - T(1);
    return {f, excess / s, -excess * excess / (T(2) * s)};
}

template <typename T>
CandidateScore<T> optimal_weight(FrequencyAtom<T> f,
                                 const DictionaryState<T>& state)
{
    const auto qs = state.quadratics(f);
    return score_candidate(f, qs.q, qs.s);
}

///
/// Scans the grid Omega and returns the candidate with the most negative
/// objective change, or nullopt when no grid atom improves L (max |q| <= 1).
/// Ties go to the lowest grid index.
///
template <typename T>
std::optional<CandidateScore<T>>
select_candidate(const DictionaryState<T>& state, Index gamma,
                 GridMethod method = GridMethod::fft)
{
    const auto grid = state.grid_quadratics(gamma, method);
    std::optional<CandidateScore<T>> best;
    for (Index k = 0; k < grid.freq.size(); ++k)
    {
        const auto score = score_candidate(FrequencyAtom<T>(grid.freq(k)),
                                           grid.q(k), grid.s(k));
        if (score.delta < T(0) && (!best || score.delta < best->delta))
        {
            best = score;
        }
    }
    return best;
}

///
/// Analytic gradient of L with respect to the atom frequencies and the log
/// weights. With w = C^{-1} y, q_j = phi_j^H w and p_j = phi_j'^H w,
///
///     dL/df_j   = -d_j Re(conj(p_j) q_j)
///     dL/drho_j = d_j (1 - |q_j|^2) / 2.
///
/// For r < m, w and q come from the capacitance system
/// (Phi^H Phi + beta D^{-1}) c = Phi^H y: w = (y - Phi c) / beta and
/// q = D^{-1} c. Forming q as Phi^H w instead would amplify the roundoff of
/// y - Phi c by 1 / beta.
///
template <typename T>
ObjectiveGradient<T> objective_gradient(const DictionaryState<T>& state)
{
    const Index r = state.size();
    if (r < 1)
    {
        throw contract_error("objective_gradient: dictionary is empty");
    }
    ObjectiveGradient<T> g{RealVector<T>(r), RealVector<T>(r)};
    const auto& d = state.weights();
    const ComplexMatrix<T> Phi = atom_matrix(state.freqs(), state.op());
    ComplexVector<T> w;
    ComplexVector<T> q;
    if (r < state.m())
    {
        ComplexMatrix<T> G = Phi.adjoint() * Phi;
        for (Index j = 0; j < r; ++j)
        {
            G(j, j) += state.beta() / d[static_cast<std::size_t>(j)];
        }
        const ComplexVector<T> c = G.llt().solve(Phi.adjoint() * state.y());
        w = (state.y() - Phi * c) / state.beta();
        q = c;
        for (Index j = 0; j < r; ++j)
        {
            q(j) /= d[static_cast<std::size_t>(j)];
        }
    }
    else
    {
        w = state.cinv_y();
        q = Phi.adjoint() * w;
    }
    for (Index j = 0; j < r; ++j)
    {
        const auto f = state.freqs()[static_cast<std::size_t>(j)];
        const T dj = d[static_cast<std::size_t>(j)];
        const std::complex<T> p =
            truncated_atom_derivative(f, state.op()).dot(w);
        g.g_f(j) = -dj * std::real(std::conj(p) * q(j));
        g.g_rho(j) = T(0.5) * dj * (T(1) - std::norm(q(j)));
    }
    return g;
}

} // namespace sair

#endif // SAIR_OBJECTIVE_HPP
