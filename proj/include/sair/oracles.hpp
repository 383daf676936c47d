#ifndef SAIR_ORACLES_HPP
#define SAIR_ORACLES_HPP

//
// Independent reference computations. Everything here uses dense
// factorizations of C (or of the problem's own matrices) and scalar searches;
// nothing reads the incremental caches of a DictionaryState except to obtain
// the atom list.
//

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "sair/atoms.hpp"
#include "sair/bench.hpp"
#include "sair/dictionary_state.hpp"
#include "sair/objective.hpp"

namespace sair
{

template <typename T = double>
ComplexVector<T> random_complex_vector(SeededStream& rng, Index n)
{
    ComplexVector<T> v(n);
    for (Index i = 0; i < n; ++i)
    {
        v(i) = std::complex<T>(static_cast<T>(rng.normal()),
                               static_cast<T>(rng.normal()));
    }
    return v;
}

//------------------------------------------------------------------------------
// Dense objective
//------------------------------------------------------------------------------

///
/// 1/2 sum d + 1/2 y^H (A diag(d) A^H + beta I)^{-1} y for an arbitrary atom
/// matrix A (columns are atoms). The quadratic form is evaluated through
///
///     y^H C^{-1} y = min_c |y - A c|^2 / beta + sum_j |c_j|^2 / d_j,
///
/// a dense least-squares problem solved by column-pivoted QR of the stacked
/// matrix [A / sqrt(beta); diag(d)^{-1/2}]. Its conditioning is the square
/// root of that of C, which keeps the reference accurate at small beta.
///
template <typename T>
T dense_objective_atoms(const ComplexMatrix<T>& A,
                        const std::vector<T>& weights, T beta,
                        const ComplexVector<T>& y)
{
    const Index m = y.size();
    const Index r = A.cols();
    if (r != static_cast<Index>(weights.size()) || A.rows() != m)
    {
        throw contract_error("dense_objective: dimension mismatch");
    }
    if (!(beta > T(0)))
    {
        throw contract_error("dense_objective: beta must be positive");
    }
    T sum_d = 0;
    for (T d : weights)
    {
        if (!(d > T(0)))
        {
            throw contract_error("dense_objective: weights must be positive");
        }
        sum_d += d;
    }
    if (r == 0)
    {
        return T(0.5) * y.squaredNorm() / beta;
    }
    const T root_beta = std::sqrt(beta);
    ComplexMatrix<T> S = ComplexMatrix<T>::Zero(m + r, r);
    S.topRows(m) = A / std::complex<T>(root_beta);
    for (Index j = 0; j < r; ++j)
    {
        S(m + j, j) = T(1) / std::sqrt(weights[static_cast<std::size_t>(j)]);
    }
    ComplexVector<T> b = ComplexVector<T>::Zero(m + r);
    b.head(m) = y / std::complex<T>(root_beta);
    const ComplexVector<T> c = S.colPivHouseholderQr().solve(b);
    return T(0.5) * sum_d + T(0.5) * (b - S * c).squaredNorm();
}

/// Same quantity through an LDL^T factorization of C itself.
template <typename T>
T direct_dense_objective(const ComplexMatrix<T>& A,
                         const std::vector<T>& weights, T beta,
                         const ComplexVector<T>& y)
{
    ComplexMatrix<T> C =
        ComplexMatrix<T>::Identity(y.size(), y.size()) * std::complex<T>(beta);
    T sum_d = 0;
    for (Index j = 0; j < A.cols(); ++j)
    {
        const T d = weights[static_cast<std::size_t>(j)];
        C.noalias() += d * A.col(j) * A.col(j).adjoint();
        sum_d += d;
    }
    return T(0.5) * sum_d + T(0.5) * std::real(y.dot(C.ldlt().solve(y)));
}

template <typename T>
T dense_objective(const std::vector<FrequencyAtom<T>>& freqs,
                  const std::vector<T>& weights, T beta,
                  const ComplexVector<T>& y, const MeasurementOperator& op)
{
    return dense_objective_atoms(atom_matrix(freqs, op), weights, beta, y);
}

/// Scalar used by the state-based oracles: extended precision, so that the
/// reference stays accurate when C is ill-conditioned (small beta).
using OracleScalar = long double;

namespace detail
{
template <typename U, typename T>
std::vector<FrequencyAtom<U>> promote(const std::vector<FrequencyAtom<T>>& f)
{
    std::vector<FrequencyAtom<U>> out;
    out.reserve(f.size());
    for (const auto& a : f)
    {
        out.emplace_back(static_cast<U>(a.value()));
    }
    return out;
}

template <typename U, typename T>
std::vector<U> promote(const std::vector<T>& v)
{
    return std::vector<U>(v.begin(), v.end());
}
} // namespace detail

/// Dense objective of the state's atom list, evaluated in OracleScalar.
template <typename T>
T dense_objective(const DictionaryState<T>& state)
{
    using U = OracleScalar;
    return static_cast<T>(dense_objective(
        detail::promote<U>(state.freqs()), detail::promote<U>(state.weights()),
        static_cast<U>(state.beta()),
        ComplexVector<U>(state.y().template cast<std::complex<U>>()),
        state.op()));
}

/// (q, s) at f by a dense solve with C rebuilt from the atom list, in
/// OracleScalar.
template <typename T>
Quadratics<T> dense_quadratics(const DictionaryState<T>& state,
                               FrequencyAtom<T> f)
{
    using U = OracleScalar;
    const auto freqs = detail::promote<U>(state.freqs());
    const auto weights = detail::promote<U>(state.weights());
    const ComplexMatrix<U> A = atom_matrix(freqs, state.op());
    ComplexMatrix<U> C = ComplexMatrix<U>::Identity(state.m(), state.m()) *
                         std::complex<U>(static_cast<U>(state.beta()));
    for (Index j = 0; j < A.cols(); ++j)
    {
        C.noalias() += weights[static_cast<std::size_t>(j)] * A.col(j) *
                       A.col(j).adjoint();
    }
    const ComplexVector<U> phi =
        truncated_atom(FrequencyAtom<U>(static_cast<U>(f.value())), state.op());
    const ComplexVector<U> cphi = C.ldlt().solve(phi);
    const ComplexVector<U> y = state.y().template cast<std::complex<U>>();
    const std::complex<U> q = cphi.dot(y);
    return {std::complex<T>(static_cast<T>(q.real()), static_cast<T>(q.imag())),
            static_cast<T>(std::real(phi.dot(cphi)))};
}

//------------------------------------------------------------------------------
// Limit probe for x^H (T + beta I)^{-1} x
//------------------------------------------------------------------------------

enum class LimitVerdict
{
    converged,
    diverging,
    inconclusive,
};

template <typename T>
struct LimitProbeReport
{
    std::vector<T> beta_sequence;
    std::vector<T> values;
    LimitVerdict verdict = LimitVerdict::inconclusive;
    T limit = std::numeric_limits<T>::quiet_NaN(); ///< last value if converged
    T pinv_value = 0; ///< x^H T^+ x
};

/// x^H T^+ x through the eigendecomposition of T (eigenvalues below
/// rel_tol * max(1, lambda_max) are treated as zero).
template <typename T>
T pseudo_inverse_quadratic(const ComplexMatrix<T>& Tm,
                           const ComplexVector<T>& x, T rel_tol = T(1e-10))
{
    Eigen::SelfAdjointEigenSolver<ComplexMatrix<T>> es(Tm);
    const auto& lam = es.eigenvalues();
    const T cutoff = rel_tol * std::max(T(1), lam.maxCoeff());
    const ComplexVector<T> c = es.eigenvectors().adjoint() * x;
    T value = 0;
    for (Index i = 0; i < lam.size(); ++i)
    {
        if (lam(i) > cutoff)
        {
            value += std::norm(c(i)) / lam(i);
        }
    }
    return value;
}

///
/// Evaluates v(beta) = x^H (T + beta I)^{-1} x along a decreasing beta
/// sequence and classifies the behaviour at the small end:
///   - diverging when the last ratio v_k / v_{k-1} is within 10% of the beta
///     ratio beta_{k-1} / beta_k (growth like c / beta);
///   - converged when the last two values agree to 1e-6 relative and match
///     x^H T^+ x to 1e-6 relative.
///
template <typename T>
LimitProbeReport<T> lemma3_limit_probe(const ComplexMatrix<T>& Tm,
                                       const ComplexVector<T>& x,
                                       const std::vector<T>& betas)
{
    const Index n = Tm.rows();
    if (Tm.cols() != n || x.size() != n)
    {
        throw contract_error("limit probe: T must be square and match x");
    }
    if (betas.size() < 2)
    {
        throw contract_error("limit probe: need at least two beta values");
    }
    for (std::size_t k = 0; k < betas.size(); ++k)
    {
        if (!(betas[k] > T(0)) || (k > 0 && !(betas[k] < betas[k - 1])))
        {
            throw contract_error(
                "limit probe: betas must be positive and strictly decreasing");
        }
    }
    const T scale = std::max(T(1), Tm.cwiseAbs().maxCoeff());
    if ((Tm - Tm.adjoint()).cwiseAbs().maxCoeff() > T(1e-10) * scale)
    {
        throw contract_error("limit probe: T is not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix<T>> es(Tm,
                                                       Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -T(1e-10) * scale)
    {
        throw contract_error("limit probe: T is not positive semidefinite");
    }

    LimitProbeReport<T> rep;
    rep.beta_sequence = betas;
    rep.pinv_value = pseudo_inverse_quadratic(Tm, x);
    for (T beta : betas)
    {
        ComplexMatrix<T> shifted = Tm;
        shifted.diagonal().array() += beta;
        const ComplexVector<T> w = shifted.ldlt().solve(x);
        rep.values.push_back(std::real(x.dot(w)));
    }

    const std::size_t k = rep.values.size() - 1;
    const T v_prev = rep.values[k - 1];
    const T v_last = rep.values[k];
    const T beta_ratio = betas[k - 1] / betas[k];
    if (v_prev > T(0) && std::abs((v_last / v_prev) / beta_ratio - T(1)) <= T(0.1))
    {
        rep.verdict = LimitVerdict::diverging;
    }
    else
    {
        const T ref = std::max(std::abs(v_last),
                               std::numeric_limits<T>::min());
        const bool stable = std::abs(v_last - v_prev) <= T(1e-6) * ref;
        const bool matches =
            std::abs(v_last - rep.pinv_value) <=
            T(1e-6) * std::max(std::abs(rep.pinv_value),
                               std::numeric_limits<T>::min());
        if (stable && matches)
        {
            rep.verdict = LimitVerdict::converged;
            rep.limit = v_last;
        }
    }
    return rep;
}

/// Low-rank PSD test matrix T = B B^H with x drawn either in range(B) or at
/// random, and the membership decided by projection onto range(B).
template <typename T>
struct LimitCase
{
    ComplexMatrix<T> Tm;
    ComplexVector<T> x;
    bool in_range = false; ///< by projection residual <= 1e-8 |x|
};

template <typename T = double>
LimitCase<T> random_limit_case(SeededStream& rng, Index n, Index rank,
                               bool draw_in_range)
{
    ComplexMatrix<T> B(n, rank);
    for (Index j = 0; j < rank; ++j)
    {
        B.col(j) = random_complex_vector<T>(rng, n);
    }
    LimitCase<T> c;
    c.Tm = B * B.adjoint();
    c.Tm = T(0.5) * (c.Tm + c.Tm.adjoint()).eval();
    c.x = draw_in_range ? ComplexVector<T>(B * random_complex_vector<T>(rng, rank))
                        : random_complex_vector<T>(rng, n);
    const Eigen::HouseholderQR<ComplexMatrix<T>> qr(B);
    const ComplexMatrix<T> Q =
        qr.householderQ() * ComplexMatrix<T>::Identity(n, rank);
    const ComplexVector<T> resid = c.x - Q * (Q.adjoint() * c.x);
    c.in_range = resid.norm() <= T(1e-8) * c.x.norm();
    return c;
}

/// beta = 1e-2, 1e-3, ..., 1e-12.
template <typename T = double>
std::vector<T> default_probe_betas()
{
    std::vector<T> b;
    for (int k = 2; k <= 12; ++k)
    {
        b.push_back(std::pow(T(10), T(-k)));
    }
    return b;
}

//------------------------------------------------------------------------------
// Atomic norm special cases
//------------------------------------------------------------------------------

///
/// Minimum of L over the weights of the orthonormal atoms {e_i} at fixed
/// beta. Coordinates decouple into 1/2 d + 1/2 |x_i|^2 / (d + beta), whose
/// minimizer is d = max(0, |x_i| - beta):
///   |x_i| > beta : |x_i| - beta / 2
///   otherwise    : |x_i|^2 / (2 beta)
///
template <typename T>
T l1_specialization_check(const ComplexVector<T>& x, T beta)
{
    if (!(beta > T(0)))
    {
        throw contract_error("l1 check: beta must be positive");
    }
    T total = 0;
    for (Index i = 0; i < x.size(); ++i)
    {
        const T a = std::abs(x(i));
        total += a > beta ? a - beta / T(2) : a * a / (T(2) * beta);
    }
    return total;
}

/// The weights attaining l1_specialization_check's minimum.
template <typename T>
std::vector<T> l1_optimal_weights(const ComplexVector<T>& x, T beta)
{
    std::vector<T> d(static_cast<std::size_t>(x.size()));
    for (Index i = 0; i < x.size(); ++i)
    {
        d[static_cast<std::size_t>(i)] = std::max(T(0), std::abs(x(i)) - beta);
    }
    return d;
}

///
/// Minimum of L over d for the single atom a = a(f) with y = s a. With
/// N = |a|^2, y^H (d a a^H + beta I)^{-1} y = |s|^2 N / (beta + d N), which is
/// minimized at d = |s| - beta / N and gives |s| - beta / (2N).
///
template <typename T>
T single_atom_norm_check(std::complex<T> s, FrequencyAtom<T> f, Index n,
                         T beta)
{
    if (!(beta > T(0)))
    {
        throw contract_error("single atom check: beta must be positive");
    }
    const T N = steering_vector(f, n).squaredNorm();
    const T a = std::abs(s);
    const T d = a - beta / N;
    if (d > T(0))
    {
        return T(0.5) * d + T(0.5) * a * a * N / (beta + d * N);
    }
    return T(0.5) * a * a * N / beta;
}

//------------------------------------------------------------------------------
// Numeric optimal weight
//------------------------------------------------------------------------------

template <typename T>
struct NumericWeight
{
    T d = 0;
    T delta = 0;
};

///
/// Golden-section minimization of
///     dL(d) = 1/2 (d - |q|^2 / (1/d + s))
/// over (0, d_max], d_max = 10 max(1, |q|) / s, with q and s from a dense
/// solve. A 400-point pre-scan brackets the minimum and checks that the
/// sampled profile is unimodal. The search runs in 50-digit arithmetic:
/// near the minimum dL is flat, and comparing values of size |q|^2 / s in
/// double would only resolve d to about sqrt(eps |q|^2 / s).
///
template <typename T>
NumericWeight<T> numeric_dhat(FrequencyAtom<T> f,
                              const DictionaryState<T>& state,
                              T tol = T(1e-10))
{
    using H = boost::multiprecision::cpp_bin_float_50;
    const auto qs = dense_quadratics(state, f);
    const H q2 = H(std::norm(qs.q));
    const H s = H(qs.s);
    auto dl = [&](const H& d) -> H { return (d - q2 / (H(1) / d + s)) / 2; };

    const H d_max = H(10) * std::max(H(1), H(sqrt(q2))) / s;
    constexpr int scan = 400;
    std::vector<H> vals(scan);
    int best = 0;
    for (int i = 0; i < scan; ++i)
    {
        vals[static_cast<std::size_t>(i)] = dl(d_max * (i + 1) / scan);
        if (vals[static_cast<std::size_t>(i)] <
            vals[static_cast<std::size_t>(best)])
        {
            best = i;
        }
    }
    for (int i = 1; i < scan; ++i)
    {
        const H step =
            vals[static_cast<std::size_t>(i)] - vals[static_cast<std::size_t>(i - 1)];
        if ((i <= best && step > 0) || (i > best && step < 0))
        {
            throw numerical_error("numeric_dhat: objective change is not "
                                  "unimodal on the scan");
        }
    }
    if (!(vals[static_cast<std::size_t>(best)] < 0))
    {
        return {T(0), T(0)};
    }

    H lo = d_max * std::max(best, 0) / scan;
    H hi = d_max * std::min(best + 2, scan) / scan;
    const H invphi = (sqrt(H(5)) - 1) / 2;
    H a = hi - invphi * (hi - lo);
    H b = lo + invphi * (hi - lo);
    H fa = dl(a);
    H fb = dl(b);
    const H abs_tol = H(tol) * std::max(H(1), hi) * H(1e-6);
    while (hi - lo > abs_tol)
    {
        if (fa < fb)
        {
            hi = b;
            b = a;
            fb = fa;
            a = hi - invphi * (hi - lo);
            fa = dl(a);
        }
        else
        {
            lo = a;
            a = b;
            fa = fb;
            b = lo + invphi * (hi - lo);
            fb = dl(b);
        }
    }
    const H d = (lo + hi) / 2;
    return {static_cast<T>(d), static_cast<T>(dl(d))};
}

//------------------------------------------------------------------------------
// Finite-difference gradient
//------------------------------------------------------------------------------

/// Central differences of dense_objective in every f_j and rho_j = log d_j.
template <typename T>
ObjectiveGradient<T> fd_gradient(const DictionaryState<T>& state, T step)
{
    if (!(step >= T(1e-8) && step <= T(1e-4)))
    {
        throw contract_error("fd_gradient: step must lie in [1e-8, 1e-4]");
    }
    const Index r = state.size();
    ObjectiveGradient<T> g{RealVector<T>(r), RealVector<T>(r)};
    using U = OracleScalar;
    const auto f0 = detail::promote<U>(state.freqs());
    const auto d0 = detail::promote<U>(state.weights());
    const ComplexVector<U> y = state.y().template cast<std::complex<U>>();
    auto eval = [&](Index j, T df, T drho) {
        auto f = f0;
        auto d = d0;
        const auto pos = static_cast<std::size_t>(j);
        f[pos] = FrequencyAtom<U>(f[pos].value() + static_cast<U>(df));
        d[pos] = d[pos] * std::exp(static_cast<U>(drho));
        return dense_objective(f, d, static_cast<U>(state.beta()), y,
                               state.op());
    };
    for (Index j = 0; j < r; ++j)
    {
        g.g_f(j) = static_cast<T>((eval(j, step, 0) - eval(j, -step, 0)) /
                                  (U(2) * step));
        g.g_rho(j) = static_cast<T>((eval(j, 0, step) - eval(j, 0, -step)) /
                                    (U(2) * step));
    }
    return g;
}

//------------------------------------------------------------------------------
// Random states for cross-checks
//------------------------------------------------------------------------------

struct RandomStateOptions
{
    Index min_n = 4;
    Index max_n = 64;
    Index max_atoms = 8;
    double beta_lo = 1e-8;
    double beta_hi = 1.0;
    double weight_lo = 0.1;
    double weight_hi = 3.0;
    bool compressive = true; ///< draw m < n part of the time
};

/// Random state built through the incremental add_atom path.
template <typename T = double>
DictionaryState<T> random_state(SeededStream& rng,
                                const RandomStateOptions& opt = {})
{
    const Index n =
        opt.min_n + static_cast<Index>(rng.below(
                        static_cast<std::uint64_t>(opt.max_n - opt.min_n + 1)));
    Index m = n;
    if (opt.compressive && rng.uniform() < 0.5)
    {
        m = std::max<Index>(1, n / 2) +
            static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - n / 2)));
    }
    MeasurementOperator op = MeasurementOperator::complete(n);
    if (m < n)
    {
        std::vector<Index> pool(static_cast<std::size_t>(n));
        std::iota(pool.begin(), pool.end(), Index(0));
        for (Index i = 0; i < m; ++i)
        {
            const auto j = static_cast<Index>(
                static_cast<std::uint64_t>(i) +
                rng.below(static_cast<std::uint64_t>(n - i)));
            std::swap(pool[static_cast<std::size_t>(i)],
                      pool[static_cast<std::size_t>(j)]);
        }
        pool.resize(static_cast<std::size_t>(m));
        std::sort(pool.begin(), pool.end());
        op = MeasurementOperator(n, std::move(pool));
    }
    const T beta = static_cast<T>(
        std::exp(rng.uniform(std::log(opt.beta_lo), std::log(opt.beta_hi))));
    DictionaryState<T> state(random_complex_vector<T>(rng, m), std::move(op),
                             beta);
    const auto r = static_cast<Index>(
        rng.below(static_cast<std::uint64_t>(opt.max_atoms + 1)));
    for (Index j = 0; j < r; ++j)
    {
        const T d = static_cast<T>(std::exp(
            rng.uniform(std::log(opt.weight_lo), std::log(opt.weight_hi))));
        state.add_atom(FrequencyAtom<T>(static_cast<T>(rng.uniform())), d);
    }
    return state;
}

} // namespace sair

#endif // SAIR_ORACLES_HPP
