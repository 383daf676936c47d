#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sair/oracles.hpp"
#include "sair/solver.hpp"

using namespace sair;
using C = std::complex<double>;

TEST_CASE("single off-grid sinusoid, complete data")
{
    const Index n = 64;
    const double f0 = 0.3217;
    const C gain(1.3, -0.4);
    const std::vector<FrequencyAtom<double>> truth{FrequencyAtom<double>(f0)};
    const ComplexVector<double> x = reconstruct(truth, {gain}, n);
    const auto est = sair_run(x, MeasurementOperator::complete(n));
    REQUIRE(est.freqs.size() == 1);
    CHECK(wrap_distance(est.freqs[0].value(), f0) < 1e-7);
    CHECK(std::abs(est.gains[0] - gain) < 1e-6);
    CHECK(nmse(est.reconstruction, x) <= 1e-10);
    CHECK_FALSE(est.objective_trace.empty());
    CHECK(est.runtime_s >= 0.0);
}

TEST_CASE("single sinusoid from half of the samples")
{
    TrialSpec spec;
    spec.K = 1;
    spec.m = 32;
    spec.seed = 5;
    const auto inst = gen_instance<double>(spec);
    const auto est = sair_run(inst.y, inst.op);
    REQUIRE(est.freqs.size() == 1);
    CHECK(wrap_distance(est.freqs[0].value(), inst.freqs[0].value()) < 1e-7);
    CHECK(nmse(est.reconstruction, inst.x) <= 1e-10);
}

TEST_CASE("five well-separated sinusoids")
{
    TrialSpec spec;
    spec.seed = 3;
    const auto inst = gen_instance<double>(spec);
    const auto est = sair_run(inst.y, inst.op);
    CHECK(nmse(est.reconstruction, inst.x) <= 1e-4);
    const auto match = match_frequencies(est.freqs, inst.freqs);
    CHECK(match.unmatched_truth.empty());
    CHECK(match.max_error() < 1e-6);
    CHECK(std::is_sorted(est.freqs.begin(), est.freqs.end()));
    CHECK(est.freqs.size() == est.gains.size());
    CHECK(est.freqs.size() == est.weights.size());
    // beta decreases along the trace
    for (std::size_t k = 1; k < est.objective_trace.size(); ++k)
    {
        CHECK(est.objective_trace[k].first < est.objective_trace[k - 1].first);
    }
}

TEST_CASE("zero signal gives an empty estimate")
{
    const ComplexVector<double> y = ComplexVector<double>::Zero(16);
    const auto est = sair_run(y, MeasurementOperator::complete(16));
    CHECK(est.freqs.empty());
    CHECK(est.reconstruction.size() == 16);
    CHECK(est.reconstruction.norm() == 0.0);
}

TEST_CASE("contract violations")
{
    const ComplexVector<double> y = ComplexVector<double>::Ones(8);
    CHECK_THROWS_AS(sair_run(y, MeasurementOperator::complete(9)), contract_error);
    SolverConfig<double> cfg;
    cfg.gamma = 0;
    CHECK_THROWS_AS(sair_run(y, MeasurementOperator::complete(8), cfg), contract_error);
    cfg = {};
    cfg.beta_shrink = 1.0;
    CHECK_THROWS_AS(cfg.validate(), contract_error);
    cfg = {};
    cfg.beta_floor_factor = 0.0;
    CHECK_THROWS_AS(cfg.validate(), contract_error);
    cfg = {};
    cfg.noise_floor = -1.0;
    CHECK_THROWS_AS(cfg.validate(), contract_error);
}

TEST_CASE("refinement never increases the objective")
{
    SeededStream rng(31);
    SolverConfig<double> cfg;
    RandomStateOptions opt;
    opt.beta_lo = 1e-4;
    opt.compressive = false;
    for (int i = 0; i < 30; ++i)
    {
        auto st = random_state(rng, opt);
        if (st.empty())
        {
            continue;
        }
        const double before = objective(st);
        refine(st, cfg);
        const double after = objective(st);
        CHECK(after <= before + 1e-12 * std::abs(before));
        CHECK(std::abs(after - dense_objective(st)) <= 1e-10 * std::max(1.0, after));
        for (const auto& f : st.freqs())
        {
            CHECK(f.value() >= 0.0);
            CHECK(f.value() < 1.0);
        }
    }
}

TEST_CASE("re-estimation reaches a fixed point")
{
    const Index n = 32;
    const std::vector<FrequencyAtom<double>> truth{FrequencyAtom<double>(0.1),
                                                   FrequencyAtom<double>(0.37),
                                                   FrequencyAtom<double>(0.71)};
    const ComplexVector<double> y = reconstruct(truth, {C(2, 0), C(0, 1), C(-1, 1)}, n);
    DictionaryState<double> st(y, MeasurementOperator::complete(n), 0.05);
    for (const auto& f : truth)
    {
        st.add_atom(f, 1.0);
    }
    const SolverConfig<double> cfg;
    for (int pass = 0; pass < 30; ++pass)
    {
        reestimate_and_prune(st, cfg);
    }
    const auto w = st.weights();
    const double before = objective(st);
    CHECK(reestimate_and_prune(st, cfg) == 0);
    REQUIRE(st.size() == 3);
    for (std::size_t j = 0; j < w.size(); ++j)
    {
        CHECK(st.weights()[j] == doctest::Approx(w[j]).epsilon(1e-6));
    }
    CHECK(objective(st) <= before + 1e-12 * before);
    // Each weight is optimal given the others: |q_j| = 1.
    const auto g = objective_gradient(st);
    CHECK(g.g_rho.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("re-estimation prunes atoms that do not help")
{
    const Index n = 16;
    const std::vector<FrequencyAtom<double>> truth{FrequencyAtom<double>(0.25)};
    const ComplexVector<double> y = reconstruct(truth, {C(4, 0)}, n);
    DictionaryState<double> st(y, MeasurementOperator::complete(n), 0.1);
    st.add_atom(FrequencyAtom<double>(0.25), 3.0);
    st.add_atom(FrequencyAtom<double>(0.6), 0.5); // orthogonal-ish, no signal
    const Index removed = reestimate_and_prune(st, SolverConfig<double>{});
    CHECK(removed == 1);
    REQUIRE(st.size() == 1);
    CHECK(st.freqs()[0].value() == doctest::Approx(0.25));
}

TEST_CASE("least-squares gains and reconstruction")
{
    const Index n = 20;
    const MeasurementOperator op(n, {0, 1, 3, 4, 6, 9, 10, 12, 15, 19});
    const std::vector<FrequencyAtom<double>> f{FrequencyAtom<double>(0.15),
                                               FrequencyAtom<double>(0.55)};
    const std::vector<C> s{C(1, 2), C(-0.5, 0.25)};
    const ComplexVector<double> x = reconstruct(f, s, n);
    const auto g = recover_gains(f, op.apply(x), op);
    REQUIRE(g.size() == 2);
    CHECK(std::abs(g[0] - s[0]) < 1e-12);
    CHECK(std::abs(g[1] - s[1]) < 1e-12);
    CHECK_THROWS_AS(recover_gains<double>({FrequencyAtom<double>(0.2), FrequencyAtom<double>(0.2)},
                                          op.apply(x), op),
                    contract_error);
}

TEST_CASE("a noise floor stops the annealing early")
{
    TrialSpec spec;
    spec.seed = 9;
    const auto inst = gen_instance<double>(spec);
    SolverConfig<double> cfg;
    cfg.noise_floor = 1e-3;
    const auto est = sair_run(inst.y, inst.op, cfg);
    REQUIRE_FALSE(est.objective_trace.empty());
    CHECK(est.objective_trace.back().first >= 1e-3);
    CHECK(nmse(est.reconstruction, inst.x) < 1e-2);
}
