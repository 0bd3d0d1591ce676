#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spt {

/// Exit codes of the command-line interface.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

/// Runs one CLI invocation. argv[0] is the program name. Subcommands:
/// simulate, backtest, learn {dwp-grid,dwp-mh,gp}, verify-master,
/// experiment, report.
int cli_dispatch(int argc, const char* const* argv);

/// Same with explicit arguments (without the program name) and streams.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses "a/b" or a plain decimal.
double parse_fraction(const std::string& text);

}  // namespace spt
