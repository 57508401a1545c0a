#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rfmt {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitTraining = 3;

// Runs one CLI invocation; args excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rfmt
