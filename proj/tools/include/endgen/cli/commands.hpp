#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace endgen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Bad invocation or missing input; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Entry point of the `endgen` tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const char* env_seed);

}  // namespace endgen::cli
