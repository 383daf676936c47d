#ifndef SAIR_ATOMS_HPP
#define SAIR_ATOMS_HPP

#include <vector>

#include "sair/types.hpp"

namespace sair
{

namespace detail
{

// e^{-2 pi i t f}, with t*f reduced mod 1 before the trig call so that large
// sample indices do not lose phase accuracy. The rounding error of the
// product is recovered with fma and added back after the reduction.
template <typename T>
std::complex<T> unit_phasor(Index t, T f)
{
    const T tt = static_cast<T>(t);
    const T tf = tt * f;
    const T low = std::fma(tt, f, -tf);
    const T phase = (tf - std::floor(tf)) + low;
    return std::polar(T(1), -two_pi<T> * phase);
}

} // namespace detail

///
/// Vandermonde steering vector [1, e^{-2 pi i f}, ..., e^{-2 pi i (n-1) f}].
///
template <typename T>
ComplexVector<T> steering_vector(FrequencyAtom<T> f, Index n)
{
    if (n < 1)
    {
        throw contract_error("steering_vector: n must be >= 1");
    }
    ComplexVector<T> a(n);
    for (Index t = 0; t < n; ++t)
    {
        a(t) = detail::unit_phasor(t, f.value());
    }
    return a;
}

/// Steering vector restricted to the sampled rows of `op`.
template <typename T>
ComplexVector<T> truncated_atom(FrequencyAtom<T> f,
                                const MeasurementOperator& op)
{
    ComplexVector<T> a(op.m());
    for (Index i = 0; i < op.m(); ++i)
    {
        a(i) = detail::unit_phasor(op.index(i), f.value());
    }
    return a;
}

/// d/df of the truncated atom: entries -2 pi i t e^{-2 pi i t f}.
template <typename T>
ComplexVector<T> truncated_atom_derivative(FrequencyAtom<T> f,
                                           const MeasurementOperator& op)
{
    ComplexVector<T> a(op.m());
    const std::complex<T> minus_two_pi_i(T(0), -two_pi<T>);
    for (Index i = 0; i < op.m(); ++i)
    {
        const Index t = op.index(i);
        a(i) = minus_two_pi_i * static_cast<T>(t) *
               detail::unit_phasor(t, f.value());
    }
    return a;
}

/// m x r matrix whose columns are the truncated atoms of `freqs`.
template <typename T>
ComplexMatrix<T> atom_matrix(const std::vector<FrequencyAtom<T>>& freqs,
                             const MeasurementOperator& op)
{
    ComplexMatrix<T> A(op.m(), static_cast<Index>(freqs.size()));
    for (std::size_t j = 0; j < freqs.size(); ++j)
    {
        A.col(static_cast<Index>(j)) = truncated_atom(freqs[j], op);
    }
    return A;
}

} // namespace sair

#endif // SAIR_ATOMS_HPP
