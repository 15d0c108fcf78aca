#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sddlab::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitRuntime = 2,
  kExitTheorem = 3,
};

// args excludes the program name. Errors go to `err` as one JSON object.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sddlab::cli
