#ifndef SAIR_DICTIONARY_STATE_HPP
#define SAIR_DICTIONARY_STATE_HPP

#include <string>
#include <type_traits>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "sair/atoms.hpp"
#include "sair/types.hpp"

namespace sair
{

/// q = phi^H C^{-1} y and s = phi^H C^{-1} phi for one candidate atom phi.
template <typename T>
struct Quadratics
{
    std::complex<T> q;
    T s;
};

/// Quadratics evaluated on the candidate grid k / (gamma n), k = 1..gamma n - 1.
template <typename T>
struct GridQuadratics
{
    RealVector<T> freq;
    ComplexVector<T> q;
    RealVector<T> s;
};

enum class GridMethod
{
    fft,
    naive,
};

///
/// ### DictionaryState
///
/// Current set of atoms (frequency, positive weight d_j) together with the
/// covariance
///
///     C = sum_j d_j phi(f_j) phi(f_j)^H + beta I,
///
/// where phi is the truncated atom of the measurement operator. The state
/// caches C^{-1}, C^{-1} y and the quadratic form y^H C^{-1} y. Atom
/// insertions, removals and weight changes are rank-one updates of C and are
/// applied to the caches with the Sherman-Morrison-Woodbury identity at
/// O(m^2) cost.
///
/// Invariants kept by every mutating member:
///   - all weights > 0 and beta > 0;
///   - cinv is Hermitian (re-symmetrized after each update);
///   - the caches are rebuilt from scratch every `refresh_interval`
///     incremental updates, on any beta change, and whenever an update is
///     too ill-conditioned to apply incrementally.
///
template <typename T>
class DictionaryState
{
public:
    using Scalar = std::complex<T>;
    using Vector = ComplexVector<T>;
    using Matrix = ComplexMatrix<T>;
    /// Working precision of refresh().
    using Wide = std::conditional_t<(sizeof(T) < sizeof(long double)),
                                    long double, T>;

    /// Largest accepted digit loss of an incremental update. The update
    /// scales the inverse along phi by 1 / (1 + delta s), so relative
    /// accuracy drops by max(|1 + delta s|, 1 / |1 + delta s|); beyond this
    /// bound the caches are rebuilt instead.
    static constexpr T max_update_amplification = T(1e4);

    /// An update that shrinks y^H C^{-1} y by more than this factor is
    /// followed by a refresh.
    static constexpr T max_cancellation = T(1e-4);

    DictionaryState(Vector y, MeasurementOperator op, T beta,
                    Index refresh_interval = 64)
        : m_op(std::move(op)),
          m_y(std::move(y)),
          m_beta(beta),
          m_refresh_interval(refresh_interval)
    {
        if (m_y.size() != m_op.m())
        {
            throw contract_error("state_init: y length (" +
                                 std::to_string(m_y.size()) +
                                 ") does not match operator m (" +
                                 std::to_string(m_op.m()) + ")");
        }
        check_signal(m_y, "state_init: y");
        if (!(beta > T(0)) || !std::isfinite(beta))
        {
            throw contract_error("state_init: beta must be positive");
        }
        if (m_refresh_interval < 1)
        {
            throw contract_error("state_init: refresh interval must be >= 1");
        }
        refresh();
    }

    const MeasurementOperator& op() const
    {
        return m_op;
    }
    const Vector& y() const
    {
        return m_y;
    }
    Index m() const
    {
        return m_op.m();
    }
    Index size() const
    {
        return static_cast<Index>(m_freqs.size());
    }
    bool empty() const
    {
        return m_freqs.empty();
    }
    const std::vector<FrequencyAtom<T>>& freqs() const
    {
        return m_freqs;
    }
    const std::vector<T>& weights() const
    {
        return m_weights;
    }
    T beta() const
    {
        return m_beta;
    }
    const Matrix& cinv() const
    {
        return m_cinv;
    }
    const Vector& cinv_y() const
    {
        return m_cinv_y;
    }
    /// y^H C^{-1} y.
    T quadratic_form() const
    {
        return m_quad;
    }
    Index updates_since_refresh() const
    {
        return m_updates;
    }
    Index refresh_count() const
    {
        return m_refreshes;
    }
    Index refresh_interval() const
    {
        return m_refresh_interval;
    }

    /// Dense reconstruction of C (for checks; O(m^2 r)).
    Matrix covariance() const
    {
        Matrix C = Matrix::Identity(m(), m()) * Scalar(m_beta);
        for (std::size_t j = 0; j < m_freqs.size(); ++j)
        {
            const Vector phi = truncated_atom(m_freqs[j], m_op);
            C.noalias() += m_weights[j] * phi * phi.adjoint();
        }
        return C;
    }

    void add_atom(FrequencyAtom<T> f, T d)
    {
        if (!(d > T(0)) || !std::isfinite(d))
        {
            throw contract_error("add_atom: weight must be positive");
        }
        m_freqs.push_back(f);
        m_weights.push_back(d);
        rank_one_update(truncated_atom(f, m_op), d);
    }

    void remove_atom(Index j)
    {
        check_index(j, "remove_atom");
        const auto pos = static_cast<std::size_t>(j);
        const FrequencyAtom<T> f = m_freqs[pos];
        const T d = m_weights[pos];
        m_freqs.erase(m_freqs.begin() + j);
        m_weights.erase(m_weights.begin() + j);
        rank_one_update(truncated_atom(f, m_op), -d);
    }

    void update_weight(Index j, T d_new)
    {
        check_index(j, "update_weight");
        if (!(d_new > T(0)) || !std::isfinite(d_new))
        {
            throw contract_error("update_weight: weight must be positive");
        }
        const auto pos = static_cast<std::size_t>(j);
        const T delta = d_new - m_weights[pos];
        m_weights[pos] = d_new;
        if (delta != T(0))
        {
            rank_one_update(truncated_atom(m_freqs[pos], m_op), delta);
        }
    }

    /// Replaces beta; C changes by a multiple of I, so caches are rebuilt.
    void set_beta(T beta)
    {
        if (!(beta > T(0)) || !std::isfinite(beta))
        {
            throw contract_error("set_beta: beta must be positive");
        }
        m_beta = beta;
        refresh();
    }

    /// Replaces the whole atom set and rebuilds the caches.
    void assign(std::vector<FrequencyAtom<T>> freqs, std::vector<T> weights)
    {
        if (freqs.size() != weights.size())
        {
            throw contract_error("assign: frequency/weight count mismatch");
        }
        for (T d : weights)
        {
            if (!(d > T(0)) || !std::isfinite(d))
            {
                throw contract_error("assign: weights must be positive");
            }
        }
        m_freqs = std::move(freqs);
        m_weights = std::move(weights);
        refresh();
    }

    ///
    /// Rebuilds cinv, C^{-1} y and y^H C^{-1} y from the atom list.
    ///
    /// With r < m atoms the inverse is formed through the r x r capacitance
    /// matrix G = Phi^H Phi + beta D^{-1}:
    ///
    ///     C^{-1}     = (I - Phi G^{-1} Phi^H) / beta
    ///     C^{-1} y   = (y - Phi c) / beta,          c = G^{-1} Phi^H y
    ///     y^H C^{-1} y = |y - Phi c|^2 / beta + sum_j |c_j|^2 / d_j
    ///
    /// which keeps the quadratic form free of cancellation when beta is
    /// small. Otherwise C itself is factorized.
    ///
    void refresh()
    {
        const Index mm = m();
        const Index r = size();
        ++m_refreshes;
        m_updates = 0;
        if (r == 0)
        {
            m_cinv = Matrix::Identity(mm, mm) * Scalar(T(1) / m_beta);
            m_cinv_y = m_y / m_beta;
            m_quad = m_y.squaredNorm() / m_beta;
            return;
        }

        const Matrix Phi = atom_matrix(m_freqs, m_op);
        if (r < mm)
        {
            Matrix G = Phi.adjoint() * Phi;
            for (Index j = 0; j < r; ++j)
            {
                G(j, j) += m_beta / m_weights[static_cast<std::size_t>(j)];
            }
            Eigen::LLT<Matrix> llt(G);
            if (llt.info() != Eigen::Success)
            {
                throw numerical_error("refresh: capacitance matrix is not "
                                      "positive definite");
            }
            const Vector c = llt.solve(Phi.adjoint() * m_y);
            const Vector resid = m_y - Phi * c;
            m_cinv = Matrix::Identity(mm, mm);
            m_cinv.noalias() -= Phi * llt.solve(Phi.adjoint());
            m_cinv /= Scalar(m_beta);
            m_cinv_y = resid / m_beta;
            T penalty = 0;
            for (Index j = 0; j < r; ++j)
            {
                penalty += std::norm(c(j)) /
                           m_weights[static_cast<std::size_t>(j)];
            }
            m_quad = resid.squaredNorm() / m_beta + penalty;
        }
        else
        {
            // C may be nearly singular here (no beta-dominated subspace);
            // factorize it in extended precision.
            using W = Wide;
            using WMatrix = ComplexMatrix<W>;
            std::vector<FrequencyAtom<W>> freqs;
            for (const auto& f : m_freqs)
            {
                freqs.emplace_back(static_cast<W>(f.value()));
            }
            const WMatrix A = atom_matrix(freqs, m_op);
            WMatrix C = WMatrix::Identity(mm, mm) *
                        std::complex<W>(static_cast<W>(m_beta));
            for (Index j = 0; j < r; ++j)
            {
                C.noalias() +=
                    static_cast<W>(m_weights[static_cast<std::size_t>(j)]) *
                    A.col(j) * A.col(j).adjoint();
            }
            Eigen::LLT<WMatrix> llt(C);
            if (llt.info() != Eigen::Success)
            {
                throw numerical_error(
                    "refresh: covariance is numerically singular");
            }
            const ComplexVector<W> y = m_y.template cast<std::complex<W>>();
            const ComplexVector<W> cinv_y = llt.solve(y);
            m_cinv =
                llt.solve(WMatrix::Identity(mm, mm)).template cast<Scalar>();
            m_cinv_y = cinv_y.template cast<Scalar>();
            m_quad = static_cast<T>(std::real(y.dot(cinv_y)));
        }
        symmetrize();
    }

    Quadratics<T> quadratics(FrequencyAtom<T> f) const
    {
        const Vector phi = truncated_atom(f, m_op);
        return {phi.dot(m_cinv_y), std::real(phi.dot(m_cinv * phi))};
    }

    ///
    /// q and s on the grid Omega = {k / (gamma n) : k = 1, ..., gamma n - 1}.
    ///
    /// The FFT path scatters C^{-1} y onto the sampled indices of a length
    /// gamma n buffer (one inverse DFT gives every q_k) and collapses C^{-1}
    /// along index-difference diagonals, since
    ///
    ///     s(f) = sum_{i,j} cinv_ij e^{2 pi i (t_i - t_j) f},
    ///
    /// so that a second inverse DFT gives every s_k.
    ///
    GridQuadratics<T> grid_quadratics(Index gamma,
                                      GridMethod method = GridMethod::fft) const
    {
        if (gamma < 1)
        {
            throw contract_error("grid_quadratics: gamma must be >= 1");
        }
        const Index N = gamma * m_op.n();
        GridQuadratics<T> out;
        out.freq.resize(N - 1);
        out.q.resize(N - 1);
        out.s.resize(N - 1);
        for (Index k = 1; k < N; ++k)
        {
            out.freq(k - 1) = static_cast<T>(k) / static_cast<T>(N);
        }
        if (N < 2)
        {
            return out;
        }

        if (method == GridMethod::naive)
        {
            for (Index k = 1; k < N; ++k)
            {
                const auto qs = quadratics(FrequencyAtom<T>(out.freq(k - 1)));
                out.q(k - 1) = qs.q;
                out.s(k - 1) = qs.s;
            }
            return out;
        }

        std::vector<Scalar> zq(static_cast<std::size_t>(N), Scalar(0));
        std::vector<Scalar> zs(static_cast<std::size_t>(N), Scalar(0));
        for (Index i = 0; i < m(); ++i)
        {
            const Index ti = m_op.index(i);
            zq[static_cast<std::size_t>(ti % N)] += m_cinv_y(i);
            for (Index j = 0; j < m(); ++j)
            {
                Index lag = (ti - m_op.index(j)) % N;
                if (lag < 0)
                {
                    lag += N;
                }
                zs[static_cast<std::size_t>(lag)] += m_cinv(i, j);
            }
        }

        Eigen::FFT<T> fft;
        fft.SetFlag(Eigen::FFT<T>::Unscaled);
        std::vector<Scalar> tq;
        std::vector<Scalar> ts;
        fft.inv(tq, zq);
        fft.inv(ts, zs);
        for (Index k = 1; k < N; ++k)
        {
            out.q(k - 1) = tq[static_cast<std::size_t>(k)];
            out.s(k - 1) = std::real(ts[static_cast<std::size_t>(k)]);
        }
        return out;
    }

private:
    void check_index(Index j, const char* what) const
    {
        if (j < 0 || j >= size())
        {
            throw contract_error(std::string(what) + ": atom index " +
                                 std::to_string(j) + " out of range [0, " +
                                 std::to_string(size()) + ")");
        }
    }

    void symmetrize()
    {
        m_cinv = (m_cinv + m_cinv.adjoint()).eval() * Scalar(T(0.5));
    }

    // C <- C + delta phi phi^H. The atom lists must already reflect the
    // change so that a fallback refresh sees the new C.
    void rank_one_update(const Vector& phi, T delta)
    {
        // With as many atoms as samples C has no beta-dominated subspace and
        // can be nearly singular; updates there are not accurate enough.
        if (size() + 1 >= m())
        {
            refresh();
            return;
        }
        const Vector u = m_cinv * phi;
        const T s = std::real(phi.dot(u));
        const T denom = T(1) + delta * s;
        if (!(denom > T(1) / max_update_amplification) ||
            denom > max_update_amplification)
        {
            refresh();
            return;
        }
        const Scalar q = u.dot(m_y);
        const T scale = delta / denom;
        m_cinv.noalias() -= Scalar(scale) * u * u.adjoint();
        m_cinv_y -= (Scalar(scale) * q) * u;
        const T old_quad = m_quad;
        m_quad -= scale * std::norm(q);
        symmetrize();
        // Heavy cancellation in y^H C^{-1} y means the 1/beta part of the
        // caches was just subtracted away; rebuild them stably.
        if (++m_updates >= m_refresh_interval ||
            !(m_quad > max_cancellation * old_quad))
        {
            refresh();
        }
    }

    MeasurementOperator m_op;
    Vector m_y;
    std::vector<FrequencyAtom<T>> m_freqs;
    std::vector<T> m_weights;
    T m_beta;
    Index m_refresh_interval;
    Matrix m_cinv;
    Vector m_cinv_y;
    T m_quad = 0;
    Index m_updates = 0;
    Index m_refreshes = 0;
};

} // namespace sair

#endif // SAIR_DICTIONARY_STATE_HPP
