#include "sair/cli.hpp"

#include <filesystem>
#include <iostream>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "sair/bench.hpp"
#include "sair/io.hpp"
#include "sair/solver.hpp"
#include "sair/verify.hpp"

namespace sair
{
namespace
{

struct Flags
{
    // instance
    Index n = TrialSpec{}.n;
    Index k = TrialSpec{}.K;
    Index m = TrialSpec{}.m;
    double min_sep = TrialSpec{}.min_sep;
    std::uint64_t seed = 1;
    std::string gain_model = "unit";
    // solver
    Index gamma = SolverConfig<double>{}.gamma;
    double beta_shrink = SolverConfig<double>{}.beta_shrink;
    double beta_floor = SolverConfig<double>{}.beta_floor_factor;
    double noise_floor = 0;
    Index max_atoms = 0;
    Index refine_iters = SolverConfig<double>{}.refine_max_iters;
    // bench
    Index trials = 100;
    std::vector<Index> m_grid{24, 32, 40, 48, 56, 64};
    // files
    std::string input;
    std::string output;
    std::string out_dir = ".";
    std::string truth;
    std::string indices;
    std::string format = "json";
    // verify
    std::string only;
    std::string inject_fault;
    Index samples = VerifyOptions{}.samples;
};

/// Input problems (unreadable or malformed files, inconsistent flags).
struct input_error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

void add_instance_flags(CLI::App* cmd, Flags& f, bool with_m)
{
    cmd->add_option("--n", f.n, "signal length")->check(CLI::PositiveNumber);
    cmd->add_option("--k", f.k, "number of sinusoids")
        ->check(CLI::NonNegativeNumber);
    if (with_m)
    {
        cmd->add_option("--m", f.m, "number of observed samples")
            ->check(CLI::PositiveNumber);
    }
    cmd->add_option("--min-sep", f.min_sep, "minimum wrap-around separation");
    cmd->add_option("--gain-model", f.gain_model, "unit or dynamic")
        ->check(CLI::IsMember({"unit", "dynamic"}));
}

void add_solver_flags(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--gamma", f.gamma, "grid oversampling factor")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--beta-shrink", f.beta_shrink, "beta annealing factor");
    cmd->add_option("--beta-floor", f.beta_floor,
                    "final beta as a multiple of the initial beta");
    cmd->add_option("--noise-floor", f.noise_floor,
                    "absolute lower bound on beta");
    cmd->add_option("--max-atoms", f.max_atoms, "dictionary cap (0: m)");
    cmd->add_option("--refine-iters", f.refine_iters,
                    "quasi-Newton iterations per refinement");
}

SolverConfig<double> solver_config(const Flags& f)
{
    SolverConfig<double> cfg;
    cfg.gamma = f.gamma;
    cfg.beta_shrink = f.beta_shrink;
    cfg.beta_floor_factor = f.beta_floor;
    if (f.noise_floor > 0)
    {
        cfg.noise_floor = f.noise_floor;
    }
    cfg.max_atoms = f.max_atoms;
    cfg.refine_max_iters = f.refine_iters;
    cfg.validate();
    return cfg;
}

TrialSpec trial_spec(const Flags& f)
{
    TrialSpec spec;
    spec.n = f.n;
    spec.K = f.k;
    spec.m = f.m;
    spec.min_sep = f.min_sep;
    spec.seed = f.seed;
    spec.gain_model =
        f.gain_model == "dynamic" ? GainModel::dynamic_range : GainModel::unit_phase;
    spec.validate();
    return spec;
}

std::string join(const std::string& dir, const std::string& name)
{
    return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
    {
        throw input_error(dir + ": cannot create directory: " + ec.message());
    }
}

//------------------------------------------------------------------------------

int cmd_estimate(const Flags& f, const CLI::App& cmd, std::ostream& out,
                 std::ostream& err)
{
    ComplexVector<double> y;
    std::optional<MeasurementOperator> op;
    std::optional<Truth> truth;
    SolverConfig<double> cfg;
    try
    {
        y = read_signal_csv(f.input);
        if (!f.truth.empty())
        {
            truth = read_truth_json(f.truth);
        }
        Index n = y.size();
        if (cmd.count("--n") > 0)
        {
            n = f.n;
        }
        else if (truth)
        {
            n = truth->n;
        }
        if (!f.indices.empty())
        {
            op = MeasurementOperator(n, read_indices(f.indices));
        }
        else if (n == y.size())
        {
            op = MeasurementOperator::complete(n);
        }
        else
        {
            throw input_error("signal has " + std::to_string(y.size()) +
                              " samples but n = " + std::to_string(n) +
                              "; pass --indices for partial data");
        }
        if (op->m() != y.size())
        {
            throw input_error("indices file lists " + std::to_string(op->m()) +
                              " samples but the signal has " +
                              std::to_string(y.size()));
        }
        if (truth && truth->n != n)
        {
            throw input_error("truth n does not match the signal length n");
        }
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    }

    Estimate<double> est;
    try
    {
        cfg = solver_config(f);
        est = sair_run(y, *op, cfg);
    }
    catch (const std::exception& e)
    {
        err << "solver error: " << e.what() << '\n';
        return exit_solver_error;
    }

    std::optional<double> err_value;
    if (truth)
    {
        std::vector<FrequencyAtom<double>> tf;
        for (double v : truth->frequencies)
        {
            tf.emplace_back(v);
        }
        err_value = nmse(est.reconstruction, reconstruct(tf, truth->gains, truth->n));
    }

    try
    {
        if (f.format == "csv")
        {
            std::ostringstream os;
            os << "frequency,gain_re,gain_im,weight\n";
            for (std::size_t j = 0; j < est.freqs.size(); ++j)
            {
                os << format_double(est.freqs[j].value()) << ','
                   << format_double(est.gains[j].real()) << ','
                   << format_double(est.gains[j].imag()) << ','
                   << format_double(est.weights[j]) << '\n';
            }
            if (f.output.empty())
            {
                out << os.str();
            }
            else
            {
                std::ofstream(f.output) << os.str();
            }
        }
        else
        {
            const auto j = estimate_to_json(est, err_value);
            if (f.output.empty())
            {
                out << j.dump(2) << '\n';
            }
            else
            {
                write_json(f.output, j);
            }
        }
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    }
    if (!f.output.empty() && err_value)
    {
        out << "nmse " << format_double(*err_value) << '\n';
    }
    return exit_ok;
}

int cmd_bench(const Flags& f, std::ostream& out, std::ostream& err)
{
    TrialSpec base;
    SolverConfig<double> cfg;
    try
    {
        Flags g = f;
        g.m = g.n; // validated per grid point below
        base = trial_spec(g);
        for (Index m : f.m_grid)
        {
            if (m < 1 || m > f.n)
            {
                throw input_error("--m-grid entries must lie in [1, n]");
            }
        }
        if (f.trials < 1)
        {
            throw input_error("--trials must be >= 1");
        }
        ensure_dir(f.out_dir);
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    }

    std::vector<BenchResult> results;
    try
    {
        cfg = solver_config(f);
        results = run_benchmark<double>(f.m_grid, f.trials, base, cfg);
    }
    catch (const std::exception& e)
    {
        err << "solver error: " << e.what() << '\n';
        return exit_solver_error;
    }

    if (f.format == "json")
    {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : results)
        {
            nlohmann::json trials = nlohmann::json::array();
            for (const auto& t : r.records)
            {
                trials.push_back({{"trial", t.trial},
                                  {"seed", t.seed},
                                  {"success", t.success},
                                  {"nmse", t.nmse},
                                  {"runtime_s", t.runtime_s}});
            }
            j.push_back({{"m", r.m},
                         {"trials", r.trials},
                         {"success_rate", r.success_rate},
                         {"mean_runtime_s", r.mean_runtime_s},
                         {"median_nmse", r.median_nmse},
                         {"records", trials}});
        }
        write_json(join(f.out_dir, "bench.json"), j);
    }
    else
    {
        write_trial_csv(join(f.out_dir, "trials.csv"), results);
        write_aggregate_csv(join(f.out_dir, "aggregate.csv"), results);
    }
    out << format_aggregate_table(results);
    return exit_ok;
}

int cmd_verify(const Flags& f, std::ostream& out, std::ostream& err)
{
    VerifyOptions opt;
    opt.only = f.only;
    opt.inject_fault = f.inject_fault;
    opt.seed = f.seed;
    opt.samples = f.samples;
    std::vector<CheckResult> results;
    try
    {
        results = run_verification(opt);
    }
    catch (const contract_error& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    }
    const CheckResult* first_failure = nullptr;
    for (const auto& r : results)
    {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail
            << '\n';
        if (!r.passed && !first_failure)
        {
            first_failure = &r;
        }
    }
    if (first_failure)
    {
        err << "verification failed: " << first_failure->name << '\n';
        return exit_verification_failure;
    }
    return exit_ok;
}

int cmd_gen(const Flags& f, std::ostream& out, std::ostream& err)
{
    Instance<double> inst;
    try
    {
        inst = gen_instance<double>(trial_spec(f));
        ensure_dir(f.out_dir);
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    }
    Truth t;
    t.n = f.n;
    for (std::size_t j = 0; j < inst.freqs.size(); ++j)
    {
        t.frequencies.push_back(inst.freqs[j].value());
        t.gains.push_back(inst.gains[j]);
    }
    write_signal_csv(join(f.out_dir, "signal.csv"), inst.y);
    write_truth_json(join(f.out_dir, "truth.json"), t);
    const std::string idx_path = join(f.out_dir, "indices.txt");
    if (!inst.op.is_complete())
    {
        write_indices(idx_path, inst.op.indices());
    }
    else
    {
        std::error_code ec;
        std::filesystem::remove(idx_path, ec);
    }
    out << "wrote " << f.out_dir << '\n';
    return exit_ok;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err)
{
    Flags f;
    CLI::App app{"Gridless line spectral estimation"};
    app.require_subcommand(1);

    auto* estimate = app.add_subcommand("estimate", "estimate sinusoids in a signal file");
    estimate->add_option("input", f.input, "signal CSV (header re,im)")->required();
    estimate->add_option("-o,--output", f.output, "output file (default: stdout)");
    estimate->add_option("--n", f.n, "full signal length (default: from truth or rows)")
        ->check(CLI::PositiveNumber);
    estimate->add_option("--indices", f.indices, "observed sample indices");
    estimate->add_option("--truth", f.truth, "truth JSON for the NMSE report");
    estimate->add_option("--format", f.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    add_solver_flags(estimate, f);

    auto* bench = app.add_subcommand("bench", "Monte Carlo success-rate benchmark");
    add_instance_flags(bench, f, false);
    add_solver_flags(bench, f);
    bench->add_option("--seed", f.seed, "base seed");
    bench->add_option("--trials", f.trials, "trials per m");
    bench->add_option("--m-grid", f.m_grid, "measurement counts")->delimiter(',');
    bench->add_option("--out-dir", f.out_dir, "directory for the result files");
    bench->add_option("--format", f.format, "csv or json")
        ->check(CLI::IsMember({"json", "csv"}))
        ->default_str("csv");

    auto* verify = app.add_subcommand("verify", "run the oracle cross-checks");
    verify->add_option("--only", f.only, "run a single check")
        ->check(CLI::IsMember(verification_checks()));
    verify->add_option("--seed", f.seed, "seed of the random cases");
    verify->add_option("--samples", f.samples, "cases per check");
    verify->add_option("--inject-fault", f.inject_fault)
        ->group("") // test hook, hidden from help
        ->check(CLI::IsMember(verification_checks()));

    auto* gen = app.add_subcommand("gen", "write a random test instance");
    add_instance_flags(gen, f, true);
    gen->add_option("--seed", f.seed, "instance seed");
    gen->add_option("--out-dir", f.out_dir, "directory for the instance files");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty())
    {
        rev.pop_back(); // program name
    }
    try
    {
        app.parse(rev);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e, out, err);
        return exit_input_error;
    }

    if (bench->parsed() && bench->count("--format") == 0)
    {
        f.format = "csv";
    }
    if (estimate->parsed())
    {
        return cmd_estimate(f, *estimate, out, err);
    }
    if (bench->parsed())
    {
        return cmd_bench(f, out, err);
    }
    if (verify->parsed())
    {
        return cmd_verify(f, out, err);
    }
    return cmd_gen(f, out, err);
}

} // namespace sair
