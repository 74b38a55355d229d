#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jsrl {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

// Entry point of the `jobshop` tool. args excludes the program name. Normal
// output goes to `out`; failures print one line "error[<kind>]: <message>" to
// `err` and return the matching exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version_string();

}  // namespace jsrl
