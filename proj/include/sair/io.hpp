#ifndef SAIR_IO_HPP
#define SAIR_IO_HPP

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sair/bench.hpp"
#include "sair/solver.hpp"
#include "sair/types.hpp"

namespace sair
{

/// Malformed input file; line() is 1-based, 0 when not tied to a line.
class parse_error : public std::runtime_error
{
public:
    parse_error(const std::string& path, std::size_t line,
                const std::string& what);

    std::size_t line() const { return m_line; }

private:
    std::size_t m_line;
};

/// Shortest decimal that reads back to the same double (17 significant
/// digits).
std::string format_double(double v);

//------------------------------------------------------------------------------
// Signal and indices files
//------------------------------------------------------------------------------

/// CSV with header `re,im` and one sample per row.
void write_signal_csv(const std::string& path, const ComplexVector<double>& y);
ComplexVector<double> read_signal_csv(const std::string& path);

/// One sample index per line, strictly increasing.
void write_indices(const std::string& path, const std::vector<Index>& idx);
std::vector<Index> read_indices(const std::string& path);

//------------------------------------------------------------------------------
// JSON documents
//------------------------------------------------------------------------------

struct Truth
{
    Index n = 0;
    std::vector<double> frequencies;
    std::vector<std::complex<double>> gains;
};

nlohmann::json complex_to_json(std::complex<double> z);
std::complex<double> complex_from_json(const nlohmann::json& j);

nlohmann::json truth_to_json(const Truth& t);
Truth truth_from_json(const nlohmann::json& j);
void write_truth_json(const std::string& path, const Truth& t);
Truth read_truth_json(const std::string& path);

/// {frequencies, gains:[{re,im}], weights, nmse?, runtime_s, objective_trace}
nlohmann::json estimate_to_json(const Estimate<double>& est,
                                std::optional<double> nmse_value);

void write_json(const std::string& path, const nlohmann::json& j);

//------------------------------------------------------------------------------
// Benchmark tables
//------------------------------------------------------------------------------

/// Header m,trial,seed,success,nmse,runtime_s.
void write_trial_csv(const std::string& path,
                     const std::vector<BenchResult>& results);
std::vector<TrialRecord> read_trial_csv(const std::string& path);

/// Header m,trials,success_rate,mean_runtime_s,median_nmse.
void write_aggregate_csv(const std::string& path,
                         const std::vector<BenchResult>& results);

/// Fixed-width table of the aggregate rows for terminal output.
std::string format_aggregate_table(const std::vector<BenchResult>& results);

} // namespace sair

#endif // SAIR_IO_HPP
