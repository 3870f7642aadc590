#pragma once

// Entry points behind the `slabflow` executable.

#include <iosfwd>

#include "slabflow/config.hpp"

namespace slabflow {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // bad config, I/O error, or a failed identity check in verify
  kExitMonitor = 2,
  kExitSolver = 3,   // solver failure or Picard not converged within max_picard
};

/// Picard run; writes diagnostics.csv, summary.json and SLF1 dumps into output.dir.
int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err);
/// Identity, lemma and manufactured-solution checks; prints a pass/fail table.
int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err);
/// Timing CSV (operation, grid, wall_time_s, throughput) on stdout.
int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err);
/// Writes the extension of eta0 and its vertical derivative to output.dir/extension.slf.
int cmd_extend(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace slabflow
