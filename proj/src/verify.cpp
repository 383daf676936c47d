#include "sair/verify.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <sstream>

#include "sair/oracles.hpp"

namespace sair
{
namespace
{

struct Context
{
    std::uint64_t seed;
    Index samples;
    bool fault; // corrupt the reference of this check
};

std::string sci(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

double rel(double a, double b)
{
    return std::abs(a - b) / std::max(1.0, std::abs(b));
}

CheckResult check_objective(const Context& c)
{
    SeededStream rng(mix64(c.seed ^ 0x01));
    double worst = 0;
    for (Index i = 0; i < c.samples; ++i)
    {
        const auto st = random_state(rng);
        const double ref = dense_objective(st) * (c.fault ? 1.001 : 1.0);
        worst = std::max(worst, rel(objective(st), ref));
    }
    return {"objective", worst <= 1e-10, "max rel err " + sci(worst)};
}

CheckResult check_dhat(const Context& c)
{
    SeededStream rng(mix64(c.seed ^ 0x02));
    double worst_d = 0;
    double worst_dl = 0;
    for (Index i = 0; i < c.samples; ++i)
    {
        const auto st = random_state(rng);
        const FrequencyAtom<double> f(rng.uniform());
        const auto closed = optimal_weight(f, st);
        auto num = numeric_dhat(f, st);
        if (c.fault)
        {
            num.d += 1e-3;
        }
        worst_d = std::max(worst_d, std::abs(closed.d_hat - num.d));
        worst_dl = std::max(worst_dl, rel(closed.delta, num.delta));
    }
    return {"dhat", worst_d <= 1e-6 && worst_dl <= 1e-8,
            "max |d err| " + sci(worst_d) + ", max rel dL err " +
                sci(worst_dl)};
}

CheckResult check_gradient(const Context& c)
{
    SeededStream rng(mix64(c.seed ^ 0x03));
    RandomStateOptions opt;
    opt.beta_lo = 1e-2;
    double worst = 0;
    for (Index i = 0; i < c.samples; ++i)
    {
        const auto st = random_state(rng, opt);
        if (st.empty())
        {
            continue;
        }
        const auto g = objective_gradient(st);
        auto h = fd_gradient(st, 1e-6);
        if (c.fault)
        {
            h.g_rho.array() += 1e-2;
        }
        const double num = std::hypot((g.g_f - h.g_f).norm(),
                                      (g.g_rho - h.g_rho).norm());
        const double den = std::hypot(h.g_f.norm(), h.g_rho.norm());
        worst = std::max(worst, num / std::max(1.0, den));
    }
    return {"gradient", worst <= 1e-5, "max rel err " + sci(worst)};
}

CheckResult check_l1(const Context& c)
{
    SeededStream rng(mix64(c.seed ^ 0x04));
    const double beta = 1e-8;
    double worst = 0;
    for (Index i = 0; i < c.samples; ++i)
    {
        const ComplexVector<double> x = random_complex_vector(rng, 16);
        const double l1 = x.cwiseAbs().sum();
        double closed = l1_specialization_check(x, beta);
        if (c.fault)
        {
            closed += 1e-2 * l1;
        }
        // The same minimum through the general objective with identity atoms.
        const auto d = l1_optimal_weights(x, beta);
        std::vector<Index> keep;
        for (Index j = 0; j < x.size(); ++j)
        {
            if (d[static_cast<std::size_t>(j)] > 0)
            {
                keep.push_back(j);
            }
        }
        ComplexMatrix<double> A = ComplexMatrix<double>::Zero(x.size(),
                                                              Index(keep.size()));
        std::vector<double> w;
        for (std::size_t k = 0; k < keep.size(); ++k)
        {
            A(keep[k], Index(k)) = 1.0;
            w.push_back(d[static_cast<std::size_t>(keep[k])]);
        }
        const double general = dense_objective_atoms(A, w, beta, x);
        worst = std::max({worst, std::abs(closed - l1) / l1,
                          std::abs(general - closed) / l1});
    }
    return {"l1", worst <= 1e-4, "max err / |x|_1 " + sci(worst)};
}

CheckResult check_lemma3(const Context& c)
{
    SeededStream rng(mix64(c.seed ^ 0x05));
    const auto betas = default_probe_betas();
    Index correct = 0;
    const Index cases = std::max<Index>(c.samples / 2, 20);
    for (Index i = 0; i < cases; ++i)
    {
        const Index rank = 1 + Index(rng.below(15));
        const auto lc = random_limit_case(rng, 16, rank, i % 2 == 0);
        const auto rep = lemma3_limit_probe(lc.Tm, lc.x, betas);
        const bool expect_converged = c.fault ? !lc.in_range : lc.in_range;
        const auto expected = expect_converged ? LimitVerdict::converged
                                               : LimitVerdict::diverging;
        correct += rep.verdict == expected ? 1 : 0;
    }
    return {"lemma3", correct == cases,
            std::to_string(correct) + "/" + std::to_string(cases) +
                " verdicts correct"};
}

CheckResult check_single_atom(const Context& c)
{
    SeededStream rng(mix64(c.seed ^ 0x06));
    double worst = 0;
    for (Index i = 0; i < c.samples; ++i)
    {
        const Index n = 4 + Index(rng.below(61));
        const FrequencyAtom<double> f(rng.uniform());
        const std::complex<double> s(rng.uniform(-3, 3), rng.uniform(-3, 3));
        const double beta = std::exp(rng.uniform(std::log(1e-6), 0.0));
        const ComplexVector<double> y = s * steering_vector(f, n);
        double closed = single_atom_norm_check(s, f, n, beta);
        if (c.fault)
        {
            closed *= 1.01;
        }
        const double d = std::abs(s) - beta / double(n);
        double err;
        if (d > 0)
        {
            const std::vector<FrequencyAtom<double>> fs{f};
            const auto op = MeasurementOperator::complete(n);
            const double at = dense_objective(fs, {d}, beta, y, op);
            // d is the minimizer: neighbours must not do better.
            const double lo = dense_objective(fs, {d * (1 - 1e-3)}, beta, y, op);
            const double hi = dense_objective(fs, {d * (1 + 1e-3)}, beta, y, op);
            err = rel(at, closed);
            if (lo < at - 1e-12 * at || hi < at - 1e-12 * at)
            {
                err = 1;
            }
        }
        else
        {
            err = rel(0.5 * y.squaredNorm() / beta, closed);
        }
        worst = std::max(worst, err);
    }
    return {"single-atom", worst <= 1e-9, "max rel err " + sci(worst)};
}

CheckResult check_grid(const Context& c)
{
    SeededStream rng(mix64(c.seed ^ 0x07));
    RandomStateOptions opt;
    opt.beta_lo = 1e-3;
    double worst = 0;
    for (Index i = 0; i < std::max<Index>(c.samples / 10, 5); ++i)
    {
        const auto st = random_state(rng, opt);
        const Index gamma = 1 + Index(rng.below(8));
        const auto fast = st.grid_quadratics(gamma, GridMethod::fft);
        auto slow = st.grid_quadratics(gamma, GridMethod::naive);
        if (c.fault && slow.s.size() > 0)
        {
            slow.s(0) *= 1.01;
        }
        const double scale_q = std::max(1.0, slow.q.cwiseAbs().maxCoeff());
        const double scale_s = std::max(1.0, slow.s.cwiseAbs().maxCoeff());
        worst = std::max({worst, (fast.q - slow.q).cwiseAbs().maxCoeff() / scale_q,
                          (fast.s - slow.s).cwiseAbs().maxCoeff() / scale_s});
    }
    return {"grid", worst <= 1e-9, "max rel err " + sci(worst)};
}

using CheckFn = std::function<CheckResult(const Context&)>;

const std::vector<std::pair<std::string, CheckFn>>& registry()
{
    static const std::vector<std::pair<std::string, CheckFn>> r{
        {"objective", check_objective}, {"dhat", check_dhat},
        {"gradient", check_gradient},   {"l1", check_l1},
        {"lemma3", check_lemma3},       {"single-atom", check_single_atom},
        {"grid", check_grid},
    };
    return r;
}

} // namespace

const std::vector<std::string>& verification_checks()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& e : registry())
        {
            v.push_back(e.first);
        }
        return v;
    }();
    return names;
}

std::vector<CheckResult> run_verification(const VerifyOptions& opt)
{
    const auto& names = verification_checks();
    for (const std::string* n : {&opt.only, &opt.inject_fault})
    {
        if (!n->empty() && std::find(names.begin(), names.end(), *n) == names.end())
        {
            throw contract_error("unknown check '" + *n + "'");
        }
    }
    if (opt.samples < 1)
    {
        throw contract_error("verify: samples must be >= 1");
    }
    std::vector<CheckResult> out;
    for (const auto& [name, fn] : registry())
    {
        if (!opt.only.empty() && name != opt.only)
        {
            continue;
        }
        const Context ctx{opt.seed, opt.samples, name == opt.inject_fault};
        try
        {
            out.push_back(fn(ctx));
        }
        catch (const std::exception& e)
        {
            out.push_back({name, false, std::string("threw: ") + e.what()});
        }
    }
    return out;
}

} // namespace sair
