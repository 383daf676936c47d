#ifndef SAIR_TYPES_HPP
#define SAIR_TYPES_HPP

#include <cmath>
#include <complex>
#include <compare>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sair
{

using Index = Eigen::Index;

template <typename T>
using Complex = std::complex<T>;

template <typename T>
using RealVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using RealMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Complex sample vector; plays the role of both the signal x and the
/// observation y.
template <typename T>
using ComplexVector = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, 1>;

template <typename T>
using ComplexMatrix =
    Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic>;

/// Violated precondition of a public operation (dimension mismatch,
/// non-positive weight, index out of range, ...).
class contract_error : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown that should not happen for valid inputs.
class numerical_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

template <typename T>
constexpr T two_pi = T(2) * T(3.141592653589793238462643383279502884L);

/// Maps a real number onto [0, 1).
template <typename T>
T wrap_unit(T f)
{
    T w = f - std::floor(f);
    // floor() of a tiny negative number can leave exactly 1.
    if (w >= T(1))
    {
        w = T(0);
    }
    return w;
}

/// Distance on the unit frequency torus: min(|a-b|, 1-|a-b|).
template <typename T>
T wrap_distance(T a, T b)
{
    const T d = std::abs(wrap_unit(a) - wrap_unit(b));
    return std::min(d, T(1) - d);
}

///
/// A frequency in cycles/sample, always stored wrapped into [0, 1).
///
template <typename T>
class FrequencyAtom
{
public:
    FrequencyAtom() = default;
    explicit FrequencyAtom(T f) : m_value(wrap_unit(f)) {}

    T value() const
    {
        return m_value;
    }

    friend auto operator<=>(const FrequencyAtom&, const FrequencyAtom&) =
        default;

private:
    T m_value{0};
};

///
/// Row-subset of the n x n identity. Indices are strictly increasing and
/// lie in [0, n). The complete-data case keeps every row.
///
class MeasurementOperator
{
public:
    MeasurementOperator() = default;

    MeasurementOperator(Index n, std::vector<Index> indices)
        : m_n(n), m_indices(std::move(indices))
    {
        if (m_n < 1)
        {
            throw contract_error("measurement operator: n must be >= 1");
        }
        if (m_indices.empty() || static_cast<Index>(m_indices.size()) > m_n)
        {
            throw contract_error(
                "measurement operator: need 1 <= m <= n sampled rows");
        }
        for (std::size_t i = 0; i < m_indices.size(); ++i)
        {
            if (m_indices[i] < 0 || m_indices[i] >= m_n)
            {
                throw contract_error(
                    "measurement operator: index out of range [0, n)");
            }
            if (i > 0 && m_indices[i] <= m_indices[i - 1])
            {
                throw contract_error(
                    "measurement operator: indices must be strictly "
                    "increasing");
            }
        }
    }

    static MeasurementOperator complete(Index n)
    {
        std::vector<Index> idx(static_cast<std::size_t>(std::max<Index>(n, 0)));
        for (Index t = 0; t < n; ++t)
        {
            idx[static_cast<std::size_t>(t)] = t;
        }
        return MeasurementOperator(n, std::move(idx));
    }

    Index n() const
    {
        return m_n;
    }

    Index m() const
    {
        return static_cast<Index>(m_indices.size());
    }

    const std::vector<Index>& indices() const
    {
        return m_indices;
    }

    Index index(Index i) const
    {
        return m_indices[static_cast<std::size_t>(i)];
    }

    bool is_complete() const
    {
        return m() == m_n;
    }

    /// Applies the operator: picks the sampled entries of a length-n vector.
    template <typename Derived>
    auto apply(const Eigen::MatrixBase<Derived>& x) const
    {
        using Scalar = typename Derived::Scalar;
        if (x.size() != m_n)
        {
            throw contract_error("measurement operator: input length != n");
        }
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(m());
        for (Index i = 0; i < m(); ++i)
        {
            out(i) = x(index(i));
        }
        return out;
    }

    friend bool operator==(const MeasurementOperator&,
                           const MeasurementOperator&) = default;

private:
    Index m_n = 0;
    std::vector<Index> m_indices;
};

/// Throws unless every sample is finite and the vector is non-empty.
template <typename T>
void check_signal(const ComplexVector<T>& x, const char* what = "signal")
{
    if (x.size() < 1)
    {
        throw contract_error(std::string(what) + ": length must be >= 1");
    }
    for (Index i = 0; i < x.size(); ++i)
    {
        if (!std::isfinite(x(i).real()) || !std::isfinite(x(i).imag()))
        {
            throw contract_error(std::string(what) +
                                 ": samples must be finite");
        }
    }
}

} // namespace sair

#endif // SAIR_TYPES_HPP
