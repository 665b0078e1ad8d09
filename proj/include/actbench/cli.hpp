#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace actbench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // ingestion, schema or I/O errors
inline constexpr int kExitUsage = 2;
inline constexpr int kExitSkipped = 3;  // finished, but some runs carry skip markers

/// Entry point for the `actbench` tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace actbench::cli
