#pragma once

#include <iosfwd>

namespace emoinf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitPartial = 3;

inline constexpr const char* kConfigEnv = "EMOINF_CONFIG";
inline constexpr const char* kVersion = "1.0.0";

/// Runs the command line in-process. Reports go to files; `out` gets
/// stdout-bound output (e.g. DOT without --out), `err` diagnostics.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace emoinf::cli
