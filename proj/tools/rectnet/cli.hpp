#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace rectnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command line (without the program name). Normal output goes to
/// `out`, diagnostics and the resolved configuration to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Gradient checks and oracle comparisons; returns true when all pass.
bool selftest(std::ostream& out);

/// Volume ids (header stems) in a directory, sorted. Sidecar files such as
/// `<id>.nodules.json` and `<id>.lung.json` are skipped.
std::vector<std::string> list_volumes(const std::filesystem::path& directory);

}  // namespace rectnet::cli
