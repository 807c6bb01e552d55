#pragma once

#include <string>
#include <vector>

namespace perclab {

// Runs the perc-lab command line. Exit codes: 0 success, 1 configuration
// error, 2 runtime or resource error.
int cli_run(const std::vector<std::string>& args);

}  // namespace perclab
