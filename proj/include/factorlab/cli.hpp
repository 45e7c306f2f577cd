#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace factorlab {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitIo = 2,
  kExitStudyFailed = 3,
};

/// Entry point of the factorlab command line; args excludes the program
/// name. Output files are written as requested, summaries go to `out`,
/// diagnostics and progress to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace factorlab
