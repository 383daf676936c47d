#ifndef SAIR_CLI_HPP
#define SAIR_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace sair
{

/// Process exit codes of the command-line tool.
enum ExitCode : int
{
    exit_ok = 0,
    exit_input_error = 2,
    exit_solver_error = 3,
    exit_verification_failure = 4,
};

/// Runs the command line `args` (args[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

} // namespace sair

#endif // SAIR_CLI_HPP
