#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime failure (diverged training, failed theory check, corrupt file)
inline constexpr int kExitUsage = 2;    // bad flags, missing files, unsupported combinations

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kge::cli
