#include "sair/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sair
{

parse_error::parse_error(const std::string& path, std::size_t line,
                         const std::string& what)
    : std::runtime_error(line > 0 ? path + ":" + std::to_string(line) + ": " +
                                        what
                                  : path + ": " + what),
      m_line(line)
{
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace
{

std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw parse_error(path, 0, "cannot open file");
    }
    return in;
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path);
    if (!out)
    {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    return out;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
    {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep))
    {
        out.push_back(trim(cur));
    }
    if (!s.empty() && s.back() == sep)
    {
        out.emplace_back();
    }
    return out;
}

bool parse_double(const std::string& s, double& v)
{
    if (s.empty())
    {
        return false;
    }
    errno = 0;
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && errno != ERANGE;
}

bool parse_int(const std::string& s, long long& v)
{
    if (s.empty())
    {
        return false;
    }
    errno = 0;
    char* end = nullptr;
    v = std::strtoll(s.c_str(), &end, 10);
    return end == s.c_str() + s.size() && errno != ERANGE;
}

} // namespace

//------------------------------------------------------------------------------

void write_signal_csv(const std::string& path, const ComplexVector<double>& y)
{
    auto out = open_out(path);
    out << "re,im\n";
    for (Index i = 0; i < y.size(); ++i)
    {
        out << format_double(y(i).real()) << ',' << format_double(y(i).imag())
            << '\n';
    }
}

ComplexVector<double> read_signal_csv(const std::string& path)
{
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line))
    {
        throw parse_error(path, 1, "empty file, expected header 're,im'");
    }
    ++lineno;
    if (trim(line) != "re,im")
    {
        throw parse_error(path, lineno, "expected header 're,im'");
    }
    std::vector<std::complex<double>> vals;
    while (std::getline(in, line))
    {
        ++lineno;
        if (trim(line).empty())
        {
            continue;
        }
        const auto cols = split(line, ',');
        double re = 0;
        double im = 0;
        if (cols.size() != 2 || !parse_double(cols[0], re) ||
            !parse_double(cols[1], im))
        {
            throw parse_error(path, lineno,
                              "expected two numeric columns 're,im'");
        }
        if (!std::isfinite(re) || !std::isfinite(im))
        {
            throw parse_error(path, lineno, "non-finite sample");
        }
        vals.emplace_back(re, im);
    }
    if (vals.empty())
    {
        throw parse_error(path, lineno, "no samples");
    }
    ComplexVector<double> y(static_cast<Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i)
    {
        y(static_cast<Index>(i)) = vals[i];
    }
    return y;
}

void write_indices(const std::string& path, const std::vector<Index>& idx)
{
    auto out = open_out(path);
    for (Index i : idx)
    {
        out << i << '\n';
    }
}

std::vector<Index> read_indices(const std::string& path)
{
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<Index> idx;
    while (std::getline(in, line))
    {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty())
        {
            continue;
        }
        long long v = 0;
        if (!parse_int(t, v) || v < 0)
        {
            throw parse_error(path, lineno, "expected a non-negative integer");
        }
        if (!idx.empty() && v <= idx.back())
        {
            throw parse_error(path, lineno, "indices must be strictly increasing");
        }
        idx.push_back(static_cast<Index>(v));
    }
    if (idx.empty())
    {
        throw parse_error(path, lineno, "no indices");
    }
    return idx;
}

//------------------------------------------------------------------------------

nlohmann::json complex_to_json(std::complex<double> z)
{
    return {{"re", z.real()}, {"im", z.imag()}};
}

std::complex<double> complex_from_json(const nlohmann::json& j)
{
    return {j.at("re").get<double>(), j.at("im").get<double>()};
}

nlohmann::json truth_to_json(const Truth& t)
{
    nlohmann::json gains = nlohmann::json::array();
    for (const auto& g : t.gains)
    {
        gains.push_back(complex_to_json(g));
    }
    return {{"n", t.n}, {"frequencies", t.frequencies}, {"gains", gains}};
}

Truth truth_from_json(const nlohmann::json& j)
{
    Truth t;
    t.n = j.at("n").get<Index>();
    t.frequencies = j.at("frequencies").get<std::vector<double>>();
    for (const auto& g : j.at("gains"))
    {
        t.gains.push_back(complex_from_json(g));
    }
    if (t.n < 1 || t.frequencies.size() != t.gains.size())
    {
        throw std::invalid_argument(
            "truth needs n >= 1 and one gain per frequency");
    }
    return t;
}

void write_truth_json(const std::string& path, const Truth& t)
{
    write_json(path, truth_to_json(t));
}

Truth read_truth_json(const std::string& path)
{
    auto in = open_in(path);
    try
    {
        return truth_from_json(nlohmann::json::parse(in));
    }
    catch (const std::exception& e)
    {
        throw parse_error(path, 0, e.what());
    }
}

nlohmann::json estimate_to_json(const Estimate<double>& est,
                                std::optional<double> nmse_value)
{
    nlohmann::json freqs = nlohmann::json::array();
    for (const auto& f : est.freqs)
    {
        freqs.push_back(f.value());
    }
    nlohmann::json gains = nlohmann::json::array();
    for (const auto& g : est.gains)
    {
        gains.push_back(complex_to_json(g));
    }
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& [beta, value] : est.objective_trace)
    {
        trace.push_back({{"beta", beta}, {"objective", value}});
    }
    nlohmann::json j{{"frequencies", freqs},
                     {"gains", gains},
                     {"weights", est.weights},
                     {"runtime_s", est.runtime_s},
                     {"objective_trace", trace}};
    if (nmse_value)
    {
        j["nmse"] = *nmse_value;
    }
    return j;
}

void write_json(const std::string& path, const nlohmann::json& j)
{
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

//------------------------------------------------------------------------------

void write_trial_csv(const std::string& path,
                     const std::vector<BenchResult>& results)
{
    auto out = open_out(path);
    out << "m,trial,seed,success,nmse,runtime_s\n";
    for (const auto& res : results)
    {
        for (const auto& r : res.records)
        {
            out << r.m << ',' << r.trial << ',' << r.seed << ','
                << (r.success ? 1 : 0) << ',' << format_double(r.nmse) << ','
                << format_double(r.runtime_s) << '\n';
        }
    }
}

std::vector<TrialRecord> read_trial_csv(const std::string& path)
{
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line) ||
        trim(line) != "m,trial,seed,success,nmse,runtime_s")
    {
        throw parse_error(path, 1, "unexpected header");
    }
    std::vector<TrialRecord> recs;
    while (std::getline(in, line))
    {
        ++lineno;
        if (trim(line).empty())
        {
            continue;
        }
        const auto c = split(line, ',');
        long long m = 0;
        long long trial = 0;
        long long success = 0;
        TrialRecord r;
        bool ok = c.size() == 6 && parse_int(c[0], m) &&
                  parse_int(c[1], trial) && parse_int(c[3], success) &&
                  parse_double(c[4], r.nmse) && parse_double(c[5], r.runtime_s);
        if (ok)
        {
            errno = 0;
            char* end = nullptr;
            r.seed = std::strtoull(c[2].c_str(), &end, 10);
            ok = !c[2].empty() && end == c[2].c_str() + c[2].size() &&
                 errno != ERANGE;
        }
        if (!ok)
        {
            throw parse_error(path, lineno, "malformed trial row");
        }
        r.m = static_cast<Index>(m);
        r.trial = static_cast<Index>(trial);
        r.success = success != 0;
        recs.push_back(r);
    }
    return recs;
}

void write_aggregate_csv(const std::string& path,
                         const std::vector<BenchResult>& results)
{
    auto out = open_out(path);
    out << "m,trials,success_rate,mean_runtime_s,median_nmse\n";
    for (const auto& r : results)
    {
        out << r.m << ',' << r.trials << ',' << format_double(r.success_rate)
            << ',' << format_double(r.mean_runtime_s) << ','
            << format_double(r.median_nmse) << '\n';
    }
}

std::string format_aggregate_table(const std::vector<BenchResult>& results)
{
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%6s %8s %10s %12s %12s\n", "m", "trials",
                  "success", "runtime_s", "median_nmse");
    os << buf;
    for (const auto& r : results)
    {
        std::snprintf(buf, sizeof buf, "%6ld %8ld %10.3f %12.4g %12.3e\n",
                      static_cast<long>(r.m), static_cast<long>(r.trials),
                      r.success_rate, r.mean_runtime_s, r.median_nmse);
        os << buf;
    }
    return os.str();
}

} // namespace sair
