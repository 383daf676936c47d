#ifndef SAIR_VERIFY_HPP
#define SAIR_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "sair/types.hpp"

namespace sair
{

struct CheckResult
{
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyOptions
{
    std::string only;         ///< run a single named check; empty runs all
    std::string inject_fault; ///< test hook: corrupt the named check
    std::uint64_t seed = 1;
    Index samples = 200;
};

/// Names accepted by VerifyOptions::only, in execution order.
const std::vector<std::string>& verification_checks();

/// Runs the oracle cross-checks. Throws contract_error for an unknown name.
std::vector<CheckResult> run_verification(const VerifyOptions& opt);

} // namespace sair

#endif // SAIR_VERIFY_HPP
