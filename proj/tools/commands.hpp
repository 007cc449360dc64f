#pragma once

#include <filesystem>
#include <iosfwd>

#include "run_config.hpp"

namespace iwan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailed = 1;
inline constexpr int kExitBadConfig = 2;

/// Writes resolved_config.yaml, history.csv, timing.csv, field_gamma.csv and
/// field_abs_error.csv under `out` and a summary line to `log`. Solver
/// errors propagate.
void cmd_solve(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);

/// One subdirectory per cell of the Cartesian product of the sweep axes and
/// a summary.csv. A failing cell is marked in the summary and leaves
/// error.txt in its directory. Returns kExitOk iff every cell completed.
int cmd_sweep(const RunConfig& config, const std::filesystem::path& out, int workers, std::ostream& log);

/// FDM over config.fdm.lambdas and one IWAN solve on the same problem, each
/// in its own subdirectory, plus summary.csv. Throws std::invalid_argument
/// for a problem that is not two-dimensional.
int cmd_fdm_compare(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);

void cmd_problems(std::ostream& out);

/// Worker count: the flag when given, else IWAN_WORKERS, else 1.
int resolve_workers(int flag_value);

}  // namespace iwan::cli
