#ifndef SAIR_BENCH_HPP
#define SAIR_BENCH_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sair/atoms.hpp"
#include "sair/solver.hpp"
#include "sair/types.hpp"

namespace sair
{

//------------------------------------------------------------------------------
// Seeded randomness
//------------------------------------------------------------------------------

/// SplitMix64 finalizer; used to derive independent stream keys.
inline std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of trial `trial` at measurement count `m` under `base`.
inline std::uint64_t trial_seed(std::uint64_t base, std::int64_t m,
                                std::int64_t trial)
{
    std::uint64_t h = mix64(base);
    h = mix64(h ^ static_cast<std::uint64_t>(m));
    return mix64(h ^ static_cast<std::uint64_t>(trial));
}

///
/// Random stream keyed by a 64-bit seed. The engine (mt19937_64) is fully
/// specified by the standard and the conversions below are written out, so
/// the draws are identical on every platform.
///
class SeededStream
{
public:
    explicit SeededStream(std::uint64_t seed) : m_engine(mix64(seed)) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform()
    {
        return static_cast<double>(m_engine() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi)
    {
        return lo + (hi - lo) * uniform();
    }

    /// Uniform integer in [0, k) (rejection sampling, no modulo bias).
    std::uint64_t below(std::uint64_t k)
    {
        const std::uint64_t limit =
            std::numeric_limits<std::uint64_t>::max() -
            std::numeric_limits<std::uint64_t>::max() % k;
        std::uint64_t v;
        do
        {
            v = m_engine();
        } while (v >= limit);
        return v % k;
    }

    /// Standard normal via Box-Muller.
    double normal()
    {
        double u1;
        do
        {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(two_pi<double> * u2);
    }

private:
    std::mt19937_64 m_engine;
};

//------------------------------------------------------------------------------
// Instances
//------------------------------------------------------------------------------

enum class GainModel
{
    unit_phase,
    dynamic_range,
};

struct TrialSpec
{
    Index n = 64;
    Index K = 5;
    Index m = 64;
    double min_sep = 2.0 / 64.0;
    std::uint64_t seed = 0;
    GainModel gain_model = GainModel::unit_phase;
    double gain_low = 1.0;  ///< dynamic-range magnitudes, log-uniform
    double gain_high = 10.0;

    void validate() const
    {
        if (n < 1 || K < 0 || m < 1 || m > n)
        {
            throw contract_error("trial spec: need n >= 1, K >= 0, 1 <= m <= n");
        }
        if (!(min_sep >= 0.0) || static_cast<double>(K) * min_sep >= 1.0)
        {
            throw contract_error(
                "trial spec: K * min_sep must be < 1 for a feasible placement");
        }
        if (gain_model == GainModel::dynamic_range &&
            !(gain_low > 0.0 && gain_high >= gain_low))
        {
            throw contract_error("trial spec: need 0 < gain_low <= gain_high");
        }
    }
};

template <typename T>
struct Instance
{
    ComplexVector<T> x; ///< full-length noiseless signal
    ComplexVector<T> y; ///< observed samples, op.apply(x)
    std::vector<FrequencyAtom<T>> freqs;
    std::vector<std::complex<T>> gains;
    MeasurementOperator op;
};

inline constexpr long max_placement_attempts = 1000000;

///
/// Draws K frequencies uniformly on [0,1) (whole-set rejection until every
/// pair is at least min_sep apart on the torus), gains per the gain model and
/// m sampled rows without replacement.
///
template <typename T = double>
Instance<T> gen_instance(const TrialSpec& spec)
{
    spec.validate();
    SeededStream rng(spec.seed);
    Instance<T> inst;

    const auto K = static_cast<std::size_t>(spec.K);
    std::vector<double> f(K);
    bool placed = K == 0;
    for (long attempt = 0; attempt < max_placement_attempts && !placed;
         ++attempt)
    {
        for (auto& v : f)
        {
            v = rng.uniform();
        }
        placed = true;
        for (std::size_t i = 0; i < K && placed; ++i)
        {
            for (std::size_t j = i + 1; j < K; ++j)
            {
                if (wrap_distance(f[i], f[j]) < spec.min_sep)
                {
                    placed = false;
                    break;
                }
            }
        }
    }
    if (!placed)
    {
        throw contract_error("gen_instance: no feasible frequency placement "
                             "found within the attempt budget");
    }

    for (std::size_t k = 0; k < K; ++k)
    {
        inst.freqs.emplace_back(static_cast<T>(f[k]));
        double mag = 1.0;
        if (spec.gain_model == GainModel::dynamic_range)
        {
            mag = std::exp(rng.uniform(std::log(spec.gain_low),
                                       std::log(spec.gain_high)));
        }
        const double phase = two_pi<double> * rng.uniform();
        inst.gains.push_back(std::polar(static_cast<T>(mag),
                                        static_cast<T>(phase)));
    }

    if (spec.m == spec.n)
    {
        inst.op = MeasurementOperator::complete(spec.n);
    }
    else
    {
        std::vector<Index> pool(static_cast<std::size_t>(spec.n));
        std::iota(pool.begin(), pool.end(), Index(0));
        for (Index i = 0; i < spec.m; ++i)
        {
            const auto j = static_cast<Index>(
                static_cast<std::uint64_t>(i) +
                rng.below(static_cast<std::uint64_t>(spec.n - i)));
            std::swap(pool[static_cast<std::size_t>(i)],
                      pool[static_cast<std::size_t>(j)]);
        }
        pool.resize(static_cast<std::size_t>(spec.m));
        std::sort(pool.begin(), pool.end());
        inst.op = MeasurementOperator(spec.n, std::move(pool));
    }

    inst.x = reconstruct(inst.freqs, inst.gains, spec.n);
    inst.y = inst.op.apply(inst.x);
    return inst;
}

//------------------------------------------------------------------------------
// Metrics
//------------------------------------------------------------------------------

inline constexpr double success_nmse_threshold = 1e-4;

/// |x_hat - x|^2 / |x|^2.
template <typename T>
T nmse(const ComplexVector<T>& x_hat, const ComplexVector<T>& x)
{
    if (x_hat.size() != x.size())
    {
        throw contract_error("nmse: length mismatch");
    }
    const T ref = x.squaredNorm();
    if (ref == T(0))
    {
        throw contract_error("nmse: reference signal is zero");
    }
    return (x_hat - x).squaredNorm() / ref;
}

/// Inclusive threshold: NMSE <= 1e-4 counts as a successful recovery.
template <typename T>
bool is_success(T nmse_value, T threshold = T(success_nmse_threshold))
{
    return nmse_value <= threshold;
}

struct FrequencyMatch
{
    std::vector<std::pair<Index, Index>> pairs; ///< (estimate, truth)
    std::vector<double> errors;                 ///< wrap distance per pair
    std::vector<Index> unmatched_estimates;
    std::vector<Index> unmatched_truth;

    double max_error() const
    {
        return errors.empty() ? 0.0
                              : *std::max_element(errors.begin(), errors.end());
    }
};

namespace detail
{

// Hungarian algorithm (shortest augmenting path) for a rows <= cols cost
// matrix; returns the column assigned to each row.
inline std::vector<Index> hungarian(const RealMatrix<double>& cost)
{
    const Index n = cost.rows();
    const Index m = cost.cols();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<double> v(static_cast<std::size_t>(m + 1), 0.0);
    std::vector<Index> p(static_cast<std::size_t>(m + 1), 0);
    std::vector<Index> way(static_cast<std::size_t>(m + 1), 0);
    for (Index i = 1; i <= n; ++i)
    {
        p[0] = i;
        Index j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
        do
        {
            used[static_cast<std::size_t>(j0)] = 1;
            const Index i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= m; ++j)
            {
                const auto sj = static_cast<std::size_t>(j);
                if (used[sj])
                {
                    continue;
                }
                const double cur = cost(i0 - 1, j - 1) -
                                   u[static_cast<std::size_t>(i0)] - v[sj];
                if (cur < minv[sj])
                {
                    minv[sj] = cur;
                    way[sj] = j0;
                }
                if (minv[sj] < delta)
                {
                    delta = minv[sj];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= m; ++j)
            {
                const auto sj = static_cast<std::size_t>(j);
                if (used[sj])
                {
                    u[static_cast<std::size_t>(p[sj])] += delta;
                    v[sj] -= delta;
                }
                else
                {
                    minv[sj] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do
        {
            const Index j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Index> row_to_col(static_cast<std::size_t>(n), -1);
    for (Index j = 1; j <= m; ++j)
    {
        const Index i = p[static_cast<std::size_t>(j)];
        if (i > 0)
        {
            row_to_col[static_cast<std::size_t>(i - 1)] = j - 1;
        }
    }
    return row_to_col;
}

// Exhaustive search over injective row -> column maps (rows <= cols).
inline std::vector<Index> exhaustive_assignment(const RealMatrix<double>& cost)
{
    const Index n = cost.rows();
    const Index m = cost.cols();
    std::vector<Index> best(static_cast<std::size_t>(n));
    std::vector<Index> cur(static_cast<std::size_t>(n));
    std::vector<char> used(static_cast<std::size_t>(m), 0);
    double best_cost = std::numeric_limits<double>::infinity();
    auto rec = [&](auto&& self, Index row, double acc) -> void {
        if (acc >= best_cost)
        {
            return;
        }
        if (row == n)
        {
            best_cost = acc;
            best = cur;
            return;
        }
        for (Index j = 0; j < m; ++j)
        {
            if (used[static_cast<std::size_t>(j)])
            {
                continue;
            }
            used[static_cast<std::size_t>(j)] = 1;
            cur[static_cast<std::size_t>(row)] = j;
            self(self, row + 1, acc + cost(row, j));
            used[static_cast<std::size_t>(j)] = 0;
        }
    };
    rec(rec, 0, 0.0);
    return best;
}

} // namespace detail

///
/// Optimal one-to-one pairing of estimated and true frequencies minimizing
/// the total wrap-around error. Exhaustive up to 8 pairs, Hungarian beyond.
///
template <typename T>
FrequencyMatch match_frequencies(const std::vector<FrequencyAtom<T>>& est,
                                 const std::vector<FrequencyAtom<T>>& truth)
{
    FrequencyMatch out;
    const bool est_rows = est.size() <= truth.size();
    const auto& rows = est_rows ? est : truth;
    const auto& cols = est_rows ? truth : est;
    const auto nr = static_cast<Index>(rows.size());
    const auto nc = static_cast<Index>(cols.size());

    std::vector<Index> assign;
    if (nr > 0)
    {
        RealMatrix<double> cost(nr, nc);
        for (Index i = 0; i < nr; ++i)
        {
            for (Index j = 0; j < nc; ++j)
            {
                cost(i, j) = static_cast<double>(
                    wrap_distance(rows[static_cast<std::size_t>(i)].value(),
                                  cols[static_cast<std::size_t>(j)].value()));
            }
        }
        assign = nr <= 8 ? detail::exhaustive_assignment(cost)
                         : detail::hungarian(cost);
    }

    std::vector<char> col_used(static_cast<std::size_t>(nc), 0);
    for (Index i = 0; i < nr; ++i)
    {
        const Index j = assign[static_cast<std::size_t>(i)];
        col_used[static_cast<std::size_t>(j)] = 1;
        const Index e = est_rows ? i : j;
        const Index t = est_rows ? j : i;
        out.pairs.emplace_back(e, t);
        out.errors.push_back(static_cast<double>(
            wrap_distance(est[static_cast<std::size_t>(e)].value(),
                          truth[static_cast<std::size_t>(t)].value())));
    }
    for (Index j = 0; j < nc; ++j)
    {
        if (!col_used[static_cast<std::size_t>(j)])
        {
            (est_rows ? out.unmatched_truth : out.unmatched_estimates)
                .push_back(j);
        }
    }
    return out;
}

//------------------------------------------------------------------------------
// Monte Carlo runs
//------------------------------------------------------------------------------

struct TrialRecord
{
    Index m = 0;
    Index trial = 0;
    std::uint64_t seed = 0;
    bool success = false;
    double nmse = 0;
    double runtime_s = 0;
    Index atoms = 0;
    std::string error; ///< non-empty if the solver threw
};

struct BenchResult
{
    Index m = 0;
    Index trials = 0;
    Index successes = 0;
    double success_rate = 0;
    double mean_runtime_s = 0;
    double median_nmse = 0;
    std::vector<TrialRecord> records;
};

/// Runs one seeded trial; solver exceptions are recorded, not rethrown.
template <typename T = double>
TrialRecord run_trial(const TrialSpec& spec, const SolverConfig<T>& cfg)
{
    TrialRecord rec;
    rec.m = spec.m;
    rec.seed = spec.seed;
    const Instance<T> inst = gen_instance<T>(spec);
    const auto t0 = std::chrono::steady_clock::now();
    try
    {
        const Estimate<T> est = sair_run(inst.y, inst.op, cfg);
        rec.runtime_s = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        rec.nmse = static_cast<double>(nmse(est.reconstruction, inst.x));
        rec.atoms = static_cast<Index>(est.freqs.size());
    }
    catch (const std::exception& e)
    {
        rec.runtime_s = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        rec.nmse = std::numeric_limits<double>::infinity();
        rec.error = e.what();
    }
    rec.success = is_success(rec.nmse);
    return rec;
}

inline BenchResult aggregate(Index m, std::vector<TrialRecord> records)
{
    BenchResult res;
    res.m = m;
    res.trials = static_cast<Index>(records.size());
    double total_runtime = 0;
    std::vector<double> errs;
    for (const auto& r : records)
    {
        res.successes += r.success ? 1 : 0;
        total_runtime += r.runtime_s;
        errs.push_back(r.nmse);
    }
    if (res.trials > 0)
    {
        res.success_rate =
            static_cast<double>(res.successes) / static_cast<double>(res.trials);
        res.mean_runtime_s = total_runtime / static_cast<double>(res.trials);
        std::sort(errs.begin(), errs.end());
        const std::size_t mid = errs.size() / 2;
        res.median_nmse = errs.size() % 2 == 1
                              ? errs[mid]
                              : 0.5 * (errs[mid - 1] + errs[mid]);
    }
    res.records = std::move(records);
    return res;
}

///
/// For every m in `m_grid`, runs `trials` seeded instances of `base` with
/// seed trial_seed(base.seed, m, trial) and aggregates success rate, mean
/// solver runtime and median NMSE. Everything except the runtime fields is a
/// deterministic function of the inputs.
///
template <typename T = double>
std::vector<BenchResult> run_benchmark(const std::vector<Index>& m_grid,
                                       Index trials, const TrialSpec& base,
                                       const SolverConfig<T>& cfg = {})
{
    if (trials < 1)
    {
        throw contract_error("run_benchmark: trials must be >= 1");
    }
    std::vector<BenchResult> out;
    for (Index m : m_grid)
    {
        std::vector<TrialRecord> recs;
        recs.reserve(static_cast<std::size_t>(trials));
        for (Index t = 0; t < trials; ++t)
        {
            TrialSpec spec = base;
            spec.m = m;
            spec.seed = trial_seed(base.seed, m, t);
            TrialRecord rec = run_trial<T>(spec, cfg);
            rec.trial = t;
            recs.push_back(std::move(rec));
        }
        out.push_back(aggregate(m, std::move(recs)));
    }
    return out;
}

} // namespace sair

#endif // SAIR_BENCH_HPP
