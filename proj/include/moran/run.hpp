#ifndef MORAN_RUN_HPP
#define MORAN_RUN_HPP

#include <json.hpp>

#include <string>
#include <vector>

#include "moran/config.hpp"

namespace moran {

/// Process exit codes of the command-line tool.
enum ExitStatus : int {
  kExitOk = 0,
  kExitComparisonFailed = 1,
  kExitConfigError = 2,
  kExitPreconditionRefused = 3,
};

struct RunResult {
  int exit_status = kExitOk;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::vector<std::string> artifacts;  // file names inside the output directory
  nlohmann::json summary;
};

/// Runs the configured experiment, writing CSV artifacts and summary.json into
/// config.output. Precondition failures of the model modules are reported with
/// kExitPreconditionRefused and their message in summary["error"].
RunResult run(const RunConfig& config);

}  // namespace moran

#endif  // MORAN_RUN_HPP
