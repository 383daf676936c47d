#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sair/oracles.hpp"

using namespace sair;
using C = std::complex<double>;

namespace
{

double inverse_residual(const DictionaryState<double>& st)
{
    const auto Cm = st.covariance();
    return (Cm * st.cinv() - ComplexMatrix<double>::Identity(st.m(), st.m()))
        .cwiseAbs()
        .maxCoeff();
}

double cache_error(const DictionaryState<double>& st)
{
    const ComplexVector<double> w = st.covariance().ldlt().solve(st.y());
    const double quad = std::real(st.y().dot(w));
    return std::max({(st.cinv_y() - w).norm() / w.norm(),
                     std::abs(st.quadratic_form() - quad) / quad,
                     (st.cinv() - st.cinv().adjoint()).cwiseAbs().maxCoeff()});
}

} // namespace

TEST_CASE("empty state is beta^-1 I")
{
    ComplexVector<double> y = ComplexVector<double>::Ones(6);
    const DictionaryState<double> st(y, MeasurementOperator::complete(6), 0.5);
    CHECK(st.empty());
    CHECK((st.cinv() - ComplexMatrix<double>::Identity(6, 6) * C(2.0)).norm() == 0.0);
    CHECK(st.quadratic_form() == doctest::Approx(12.0));
    CHECK(objective(st) == doctest::Approx(6.0));
}

TEST_CASE("incremental caches invert the covariance")
{
    SeededStream rng(11);
    RandomStateOptions opt;
    opt.beta_lo = 1e-2;
    for (int i = 0; i < 200; ++i)
    {
        const auto st = random_state(rng, opt);
        CAPTURE(i);
        CHECK(inverse_residual(st) < 1e-8);
        CHECK(cache_error(st) < 1e-10);
    }
}

TEST_CASE("remove and update_weight are inverse operations")
{
    SeededStream rng(12);
    ComplexVector<double> y = random_complex_vector(rng, 24);
    DictionaryState<double> st(y, MeasurementOperator::complete(24), 0.1);
    st.add_atom(FrequencyAtom<double>(0.11), 1.5);
    st.add_atom(FrequencyAtom<double>(0.52), 0.7);
    const double before = objective(st);
    const ComplexMatrix<double> cinv_before = st.cinv();

    st.add_atom(FrequencyAtom<double>(0.8), 2.0);
    st.remove_atom(2);
    CHECK(objective(st) == doctest::Approx(before).epsilon(1e-10));
    CHECK((st.cinv() - cinv_before).cwiseAbs().maxCoeff() < 1e-10);

    DictionaryState<double> twin = st;
    st.update_weight(1, 3.0);
    twin.remove_atom(1);
    twin.add_atom(FrequencyAtom<double>(0.52), 3.0);
    CHECK(objective(st) == doctest::Approx(objective(twin)).epsilon(1e-10));
    CHECK(st.weights()[1] == 3.0);
    CHECK(twin.freqs().back().value() == doctest::Approx(0.52));
}

TEST_CASE("refresh rebuilds the caches after the update budget")
{
    SeededStream rng(13);
    ComplexVector<double> y = random_complex_vector(rng, 16);
    DictionaryState<double> st(y, MeasurementOperator::complete(16), 0.3, 3);
    const Index base = st.refresh_count();
    st.add_atom(FrequencyAtom<double>(0.1), 1.0);
    st.add_atom(FrequencyAtom<double>(0.3), 1.0);
    CHECK(st.updates_since_refresh() == 2);
    st.add_atom(FrequencyAtom<double>(0.5), 1.0);
    CHECK(st.updates_since_refresh() == 0);
    CHECK(st.refresh_count() == base + 1);

    st.set_beta(0.01);
    CHECK(st.beta() == 0.01);
    CHECK(cache_error(st) < 1e-10);
}

TEST_CASE("small beta keeps the objective accurate")
{
    SeededStream rng(14);
    RandomStateOptions opt;
    opt.beta_lo = 1e-8;
    opt.beta_hi = 1e-6;
    for (int i = 0; i < 100; ++i)
    {
        const auto st = random_state(rng, opt);
        const double ref = dense_objective(st);
        CHECK(std::abs(objective(st) - ref) <= 1e-10 * std::max(1.0, ref));
    }
}

TEST_CASE("invalid mutations are rejected")
{
    ComplexVector<double> y = ComplexVector<double>::Ones(4);
    DictionaryState<double> st(y, MeasurementOperator::complete(4), 1.0);
    CHECK_THROWS_AS(st.add_atom(FrequencyAtom<double>(0.1), 0.0), contract_error);
    CHECK_THROWS_AS(st.add_atom(FrequencyAtom<double>(0.1), -1.0), contract_error);
    CHECK_THROWS_AS(st.remove_atom(0), contract_error);
    CHECK_THROWS_AS(st.set_beta(0.0), contract_error);
    CHECK_THROWS_AS(st.assign({FrequencyAtom<double>(0.1)}, {}), contract_error);
    CHECK_THROWS_AS(DictionaryState<double>(y, MeasurementOperator::complete(5), 1.0),
                    contract_error);
    CHECK_THROWS_AS(DictionaryState<double>(y, MeasurementOperator::complete(4), -1.0),
                    contract_error);
}

TEST_CASE("FFT grid matches the direct evaluation")
{
    SeededStream rng(15);
    RandomStateOptions opt;
    opt.beta_lo = 1e-3;
    for (int i = 0; i < 40; ++i)
    {
        const auto st = random_state(rng, opt);
        const Index gamma = 1 + Index(rng.below(8));
        const auto fast = st.grid_quadratics(gamma, GridMethod::fft);
        const auto slow = st.grid_quadratics(gamma, GridMethod::naive);
        const Index N = gamma * st.op().n();
        REQUIRE(fast.freq.size() == N - 1);
        CHECK(fast.freq(0) == doctest::Approx(1.0 / double(N)));
        CHECK((fast.freq - slow.freq).cwiseAbs().maxCoeff() == 0.0);
        const double sq = std::max(1.0, slow.q.cwiseAbs().maxCoeff());
        const double ss = std::max(1.0, slow.s.cwiseAbs().maxCoeff());
        CHECK((fast.q - slow.q).cwiseAbs().maxCoeff() / sq < 1e-10);
        CHECK((fast.s - slow.s).cwiseAbs().maxCoeff() / ss < 1e-10);
        // Spot check against the single-frequency path.
        const Index k = Index(rng.below(std::uint64_t(N - 1)));
        const auto qs = st.quadratics(FrequencyAtom<double>(fast.freq(k)));
        CHECK(std::abs(qs.q - fast.q(k)) / sq < 1e-10);
        CHECK(std::abs(qs.s - fast.s(k)) / ss < 1e-10);
    }
    ComplexVector<double> y = ComplexVector<double>::Ones(4);
    DictionaryState<double> st(y, MeasurementOperator::complete(4), 1.0);
    CHECK_THROWS_AS(st.grid_quadratics(0), contract_error);
}

TEST_CASE("assign replaces the dictionary")
{
    SeededStream rng(16);
    ComplexVector<double> y = random_complex_vector(rng, 12);
    DictionaryState<double> a(y, MeasurementOperator::complete(12), 0.2);
    a.add_atom(FrequencyAtom<double>(0.2), 1.0);
    a.add_atom(FrequencyAtom<double>(0.6), 2.0);
    DictionaryState<double> b(y, MeasurementOperator::complete(12), 0.2);
    b.assign(a.freqs(), a.weights());
    CHECK(objective(a) == doctest::Approx(objective(b)).epsilon(1e-12));
    CHECK(b.updates_since_refresh() == 0);
}
