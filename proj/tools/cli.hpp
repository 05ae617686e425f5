#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace blfuse::cli {

/// Exit codes: 0 success, 2 invalid input, 3 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Runs one command line (without the program name). Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace blfuse::cli
