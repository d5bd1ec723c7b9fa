#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace localembed {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line front end. `argv[0]` is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with the arguments after the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "<subcommand> <flag>" for every option that has no help text.
std::vector<std::string> undocumented_flags();

}  // namespace localembed
