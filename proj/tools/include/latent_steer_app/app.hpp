#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace latent_steer::app {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Entry point of the `latent_steer` command. argv[0] is the program name.
/// Errors are reported as one JSON line on `err`.
int run_command(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace latent_steer::app
