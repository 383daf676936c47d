#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "sair/cli.hpp"
#include "sair/io.hpp"

using namespace sair;
namespace fs = std::filesystem;

namespace
{

struct Run
{
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "sair");
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name)
{
    const fs::path d = fs::temp_directory_path() / "sair_test_cli" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("gen then estimate recovers a single sinusoid")
{
    const auto d = fresh_dir("single");
    auto g = cli({"gen", "--k", "1", "--seed", "4", "--out-dir", d.string()});
    REQUIRE(g.code == exit_ok);
    CHECK(fs::exists(d / "signal.csv"));
    CHECK(fs::exists(d / "truth.json"));
    CHECK_FALSE(fs::exists(d / "indices.txt"));

    const auto out = d / "est.json";
    auto e = cli({"estimate", (d / "signal.csv").string(), "--truth",
                  (d / "truth.json").string(), "-o", out.string()});
    REQUIRE(e.code == exit_ok);
    const auto j = nlohmann::json::parse(slurp(out));
    CHECK(j["frequencies"].size() == 1);
    CHECK(j["nmse"].get<double>() <= 1e-10);
    CHECK(j.contains("objective_trace"));
    CHECK(j.contains("runtime_s"));
    CHECK(j["gains"][0].contains("re"));
}

TEST_CASE("compressive instance with an indices file")
{
    const auto d = fresh_dir("compressive");
    REQUIRE(cli({"gen", "--m", "40", "--seed", "2", "--out-dir", d.string()}).code == exit_ok);
    REQUIRE(fs::exists(d / "indices.txt"));
    CHECK(read_indices((d / "indices.txt").string()).size() == 40);
    CHECK(read_signal_csv((d / "signal.csv").string()).size() == 40);

    const auto truth = read_truth_json((d / "truth.json").string());
    CHECK(truth.frequencies.size() == 5);
    for (std::size_t i = 0; i < truth.frequencies.size(); ++i)
    {
        for (std::size_t k = i + 1; k < truth.frequencies.size(); ++k)
        {
            CHECK(wrap_distance(truth.frequencies[i], truth.frequencies[k]) >= 2.0 / 64);
        }
    }

    auto e = cli({"estimate", (d / "signal.csv").string(), "--indices",
                  (d / "indices.txt").string(), "--truth", (d / "truth.json").string()});
    REQUIRE(e.code == exit_ok);
    CHECK(nlohmann::json::parse(e.out)["nmse"].get<double>() <= 1e-4);

    // Without the indices the sample count does not match n.
    auto bad = cli({"estimate", (d / "signal.csv").string(), "--truth",
                    (d / "truth.json").string()});
    CHECK(bad.code == exit_input_error);
}

TEST_CASE("gen is deterministic per seed")
{
    const auto a = fresh_dir("det_a");
    const auto b = fresh_dir("det_b");
    REQUIRE(cli({"gen", "--m", "30", "--seed", "9", "--out-dir", a.string()}).code == 0);
    REQUIRE(cli({"gen", "--m", "30", "--seed", "9", "--out-dir", b.string()}).code == 0);
    for (const char* f : {"signal.csv", "truth.json", "indices.txt"})
    {
        CHECK(slurp(a / f) == slurp(b / f));
    }
}

TEST_CASE("an all-rows indices file matches complete data")
{
    const auto d = fresh_dir("allrows");
    REQUIRE(cli({"gen", "--seed", "6", "--out-dir", d.string()}).code == 0);
    std::vector<Index> all(64);
    for (Index i = 0; i < 64; ++i)
    {
        all[std::size_t(i)] = i;
    }
    write_indices((d / "all.txt").string(), all);
    auto plain = cli({"estimate", (d / "signal.csv").string(), "--format", "csv"});
    auto with = cli({"estimate", (d / "signal.csv").string(), "--indices",
                     (d / "all.txt").string(), "--format", "csv"});
    REQUIRE(plain.code == 0);
    REQUIRE(with.code == 0);
    CHECK(plain.out == with.out);
    CHECK(plain.out.rfind("frequency,gain_re,gain_im,weight\n", 0) == 0);
}

TEST_CASE("input errors exit with 2")
{
    const auto d = fresh_dir("errors");
    std::ofstream(d / "bad.csv") << "re,im\n1,2\n3;4\n";
    auto r = cli({"estimate", (d / "bad.csv").string()});
    CHECK(r.code == exit_input_error);
    CHECK(r.err.find(":3:") != std::string::npos);

    CHECK(cli({"estimate", (d / "missing.csv").string()}).code == exit_input_error);
    CHECK(cli({"estimate"}).code == exit_input_error);
    CHECK(cli({"gen", "--bogus"}).code == exit_input_error);
    CHECK(cli({}).code == exit_input_error);
    CHECK(cli({"gen", "--k", "40", "--min-sep", "0.05", "--out-dir", d.string()}).code ==
          exit_input_error);
    CHECK(cli({"verify", "--only", "nonsense"}).code == exit_input_error);
}

TEST_CASE("solver contract errors exit with 3")
{
    const auto d = fresh_dir("solver");
    REQUIRE(cli({"gen", "--k", "1", "--out-dir", d.string()}).code == 0);
    auto r = cli({"estimate", (d / "signal.csv").string(), "--beta-shrink", "1.5"});
    CHECK(r.code == exit_solver_error);
    CHECK(r.err.find("beta_shrink") != std::string::npos);
}

TEST_CASE("verify")
{
    auto one = cli({"verify", "--only", "lemma3", "--samples", "20"});
    CHECK(one.code == exit_ok);
    CHECK(one.out.find("PASS lemma3") != std::string::npos);
    CHECK(one.out.find("objective") == std::string::npos);

    auto all = cli({"verify", "--samples", "20"});
    CHECK(all.code == exit_ok);

    auto fault = cli({"verify", "--samples", "20", "--inject-fault", "gradient"});
    CHECK(fault.code == exit_verification_failure);
    CHECK(fault.err.find("gradient") != std::string::npos);
}

TEST_CASE("bench writes tables that match the in-memory results")
{
    const auto d = fresh_dir("bench");
    auto r = cli({"bench", "--trials", "2", "--m-grid", "64,48", "--seed", "3",
                  "--out-dir", d.string()});
    REQUIRE(r.code == exit_ok);
    CHECK(r.out.find("median_nmse") != std::string::npos);

    TrialSpec base;
    base.seed = 3;
    const auto mem = run_benchmark<double>({64, 48}, 2, base);
    const auto recs = read_trial_csv((d / "trials.csv").string());
    REQUIRE(recs.size() == 4);
    std::size_t k = 0;
    for (const auto& res : mem)
    {
        for (const auto& t : res.records)
        {
            CHECK(recs[k].m == t.m);
            CHECK(recs[k].seed == t.seed);
            CHECK(recs[k].success == t.success);
            CHECK(recs[k].nmse == t.nmse);
            ++k;
        }
    }
    CHECK(slurp(d / "aggregate.csv").rfind("m,trials,success_rate", 0) == 0);

    auto js = cli({"bench", "--trials", "1", "--m-grid", "64", "--format", "json",
                   "--out-dir", d.string()});
    REQUIRE(js.code == 0);
    CHECK(nlohmann::json::parse(slurp(d / "bench.json"))[0]["m"].get<int>() == 64);
    CHECK(cli({"bench", "--m-grid", "80", "--out-dir", d.string()}).code == exit_input_error);
}

TEST_CASE("the installed binary reports exit codes")
{
    const auto d = fresh_dir("binary");
    const std::string bin = SAIR_CLI_PATH;
    const int ok = std::system((bin + " gen --k 1 --out-dir " + d.string() + " > /dev/null").c_str());
    CHECK(WEXITSTATUS(ok) == 0);
    const int bad = std::system((bin + " estimate " + (d / "none.csv").string() + " 2> /dev/null").c_str());
    CHECK(WEXITSTATUS(bad) == 2);
}
