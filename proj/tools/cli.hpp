#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace xmodal::cli {

/// Exit codes returned by run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one invocation. `args` excludes the program name. Tables and
/// line-delimited JSON go to `out`; usage text and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace xmodal::cli
