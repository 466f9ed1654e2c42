#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace svldl::cli {

// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,   // config file or command-line flags
  kDataError = 3,     // manifest, feature files, output I/O
  kNumericError = 4,  // non-finite values during training
  kModelMismatch = 5, // unreadable checkpoint or shape disagreement
  kGradcheckFailed = 6,
};

// Entry point shared by the executable and the tests. args excludes the
// program name. Results go to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace svldl::cli
