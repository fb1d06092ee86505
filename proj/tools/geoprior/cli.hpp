#pragma once

#include <ostream>
#include <span>
#include <string>

namespace geoprior::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kNumericError = 4 };

/// Runs one command line (args[0] is the program name) and returns the exit code.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace geoprior::cli
