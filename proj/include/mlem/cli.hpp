#pragma once

#include <string>
#include <vector>

namespace mlem {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInvalidInput = 2,
  kExitDegenerate = 3,
  kExitConvergence = 4,
};

/// Entry point of the `mlem` tool; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace mlem
