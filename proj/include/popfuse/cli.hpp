#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace popfuse::cli {

/// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;        // bad flags or invalid configuration
inline constexpr int kSolveFailed = 2;  // infeasible or unconverged estimate
inline constexpr int kPartial = 3;      // outputs written but some replicas failed
inline constexpr int kInputError = 4;   // unreadable or malformed input data

/// Runs one subcommand (`simulate`, `estimate`, `censored`, `sentiment`).
/// `args` excludes the program name. Diagnostics go to `diag`; data only to
/// files under --out.
int run(const std::vector<std::string>& args, std::ostream& diag);

}  // namespace popfuse::cli
