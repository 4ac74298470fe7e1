#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace prosper::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitUsage = 64;

/// Subcommands: calibrate, fit-shape, register, plan, simulate, report, serve, scenario.
/// Documents go to --out, or to `out` when no path is given; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace prosper::cli
