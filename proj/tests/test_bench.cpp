#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sair/bench.hpp"

using namespace sair;
using C = std::complex<double>;

TEST_CASE("seeded streams are reproducible")
{
    SeededStream a(123);
    SeededStream b(123);
    SeededStream c(124);
    bool differs = false;
    for (int i = 0; i < 100; ++i)
    {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        differs = differs || u != c.uniform();
    }
    CHECK(differs);
    for (int i = 0; i < 1000; ++i)
    {
        CHECK(a.below(7) < 7);
    }
    CHECK(trial_seed(1, 64, 0) != trial_seed(1, 64, 1));
    CHECK(trial_seed(1, 64, 0) != trial_seed(1, 48, 0));
    CHECK(trial_seed(1, 64, 0) == trial_seed(1, 64, 0));
}

TEST_CASE("instance generation honours the spec")
{
    TrialSpec spec;
    spec.seed = 7;
    const auto inst = gen_instance<double>(spec);
    REQUIRE(inst.freqs.size() == 5);
    for (std::size_t i = 0; i < inst.freqs.size(); ++i)
    {
        CHECK(std::abs(std::abs(inst.gains[i]) - 1.0) < 1e-15);
        for (std::size_t j = i + 1; j < inst.freqs.size(); ++j)
        {
            CHECK(wrap_distance(inst.freqs[i].value(), inst.freqs[j].value()) >=
                  2.0 / 64.0);
        }
    }
    CHECK(inst.op.is_complete());
    CHECK((inst.y - inst.x).norm() == 0.0);

    spec.m = 24;
    spec.gain_model = GainModel::dynamic_range;
    const auto part = gen_instance<double>(spec);
    CHECK(part.op.m() == 24);
    CHECK(part.y.size() == 24);
    CHECK((part.op.apply(part.x) - part.y).norm() == 0.0);
    for (const auto& g : part.gains)
    {
        CHECK(std::abs(g) >= 1.0 - 1e-12);
        CHECK(std::abs(g) <= 10.0 + 1e-12);
    }

    const auto again = gen_instance<double>(spec);
    CHECK((again.x - part.x).norm() == 0.0);
    CHECK(again.op == part.op);
}

TEST_CASE("infeasible specs are rejected")
{
    TrialSpec spec;
    spec.K = 40;
    spec.min_sep = 0.03;
    CHECK_THROWS_AS(gen_instance<double>(spec), contract_error);
    spec = {};
    spec.m = 65;
    CHECK_THROWS_AS(spec.validate(), contract_error);
    spec = {};
    spec.gain_model = GainModel::dynamic_range;
    spec.gain_low = 0.0;
    CHECK_THROWS_AS(spec.validate(), contract_error);
}

TEST_CASE("NMSE and the success threshold")
{
    ComplexVector<double> x(2);
    x << C(1, 0), C(0, 1);
    CHECK(nmse(x, x) == 0.0);
    ComplexVector<double> y = x;
    y(0) += C(0.1, 0);
    CHECK(nmse(y, x) == doctest::Approx(0.01 / 2));
    CHECK_THROWS_AS(nmse(x, ComplexVector<double>(ComplexVector<double>::Zero(2))),
                    contract_error);
    CHECK_THROWS_AS(nmse(x, ComplexVector<double>(ComplexVector<double>::Zero(3))),
                    contract_error);
    CHECK(is_success(1e-4));
    CHECK_FALSE(is_success(1.0001e-4));
}

TEST_CASE("frequency matching uses wrap-around distance")
{
    using F = FrequencyAtom<double>;
    const auto m = match_frequencies<double>({F(0.999)}, {F(0.001)});
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.errors[0] == doctest::Approx(0.002));

    const auto p = match_frequencies<double>({F(0.5), F(0.1), F(0.9)}, {F(0.11), F(0.52)});
    CHECK(p.pairs.size() == 2);
    CHECK(p.unmatched_estimates == std::vector<Index>{2});
    CHECK(p.max_error() == doctest::Approx(0.02));
}

TEST_CASE("large matchings agree with exhaustive search cost")
{
    SeededStream rng(51);
    for (int rep = 0; rep < 20; ++rep)
    {
        std::vector<FrequencyAtom<double>> a;
        std::vector<FrequencyAtom<double>> b;
        for (int i = 0; i < 8; ++i)
        {
            a.emplace_back(rng.uniform());
            b.emplace_back(rng.uniform());
        }
        RealMatrix<double> cost(8, 8);
        for (int i = 0; i < 8; ++i)
        {
            for (int j = 0; j < 8; ++j)
            {
                cost(i, j) = wrap_distance(a[i].value(), b[j].value());
            }
        }
        const auto h = detail::hungarian(cost);
        const auto e = detail::exhaustive_assignment(cost);
        double ch = 0;
        double ce = 0;
        for (int i = 0; i < 8; ++i)
        {
            ch += cost(i, h[i]);
            ce += cost(i, e[i]);
        }
        CHECK(ch == doctest::Approx(ce).epsilon(1e-12));
    }
}

TEST_CASE("aggregation")
{
    std::vector<TrialRecord> recs(4);
    recs[0].nmse = 1e-20;
    recs[0].success = true;
    recs[0].runtime_s = 1.0;
    recs[1].nmse = 1e-2;
    recs[1].runtime_s = 3.0;
    recs[2].nmse = 1e-10;
    recs[2].success = true;
    recs[3].nmse = 1e-6;
    recs[3].success = true;
    const auto r = aggregate(48, recs);
    CHECK(r.m == 48);
    CHECK(r.trials == 4);
    CHECK(r.successes == 3);
    CHECK(r.success_rate == doctest::Approx(0.75));
    CHECK(r.mean_runtime_s == doctest::Approx(1.0));
    CHECK(r.median_nmse == doctest::Approx(0.5 * (1e-10 + 1e-6)));
    recs.pop_back();
    CHECK(aggregate(48, recs).median_nmse == doctest::Approx(1e-10));
}

TEST_CASE("benchmark runs are deterministic")
{
    TrialSpec base;
    base.seed = 17;
    const auto a = run_benchmark<double>({64, 40}, 3, base);
    const auto b = run_benchmark<double>({64, 40}, 3, base);
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        CHECK(a[i].success_rate == b[i].success_rate);
        REQUIRE(a[i].records.size() == 3);
        for (std::size_t t = 0; t < 3; ++t)
        {
            CHECK(a[i].records[t].seed == b[i].records[t].seed);
            CHECK(a[i].records[t].nmse == b[i].records[t].nmse);
            CHECK(a[i].records[t].trial == Index(t));
            CHECK(a[i].records[t].error.empty());
        }
    }
    CHECK(a[0].success_rate == 1.0);
    CHECK_THROWS_AS(run_benchmark<double>({64}, 0, base), contract_error);
}
