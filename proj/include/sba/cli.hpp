#pragma once

#include <string>
#include <vector>

namespace sba {

/// Full command-line entry point (args exclude argv[0]); returns the process
/// exit code: 0 success, 2 input error, 3 solver failure, 4 evaluation error.
int run_cli(const std::vector<std::string>& args);

}  // namespace sba
