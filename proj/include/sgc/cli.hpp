#pragma once

#include <iosfwd>

namespace sgc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the `sgsim` tool; subcommands simulate, trajectories,
/// compare, plot and scenarios.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sgc
