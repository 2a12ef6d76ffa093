#ifndef HNAV_CLI_HPP
#define HNAV_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace hnav {

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

/// Command-line front end. `args` excludes the program name. Subcommands:
/// gen-data, train-coop, train-policy, eval, sweep, replay, gradcheck.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hnav

#endif  // HNAV_CLI_HPP
