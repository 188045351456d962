#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace a2mae::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kRuntimeError = 2;

// `args` excludes the program name. JSON results go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace a2mae::cli
