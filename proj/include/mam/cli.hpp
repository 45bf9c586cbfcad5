#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mam::cli {

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kIoError = 1,
    kIterationLimit = 2,
    kConfigError = 3,
    kNumericFailure = 4,
};

/// Runs the `mam` command line. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mam::cli
