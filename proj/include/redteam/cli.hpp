#pragma once

// Command-line front end. Kept as a library so tests can drive every command
// in-process and inspect exit codes and output.

#include <ostream>
#include <string>
#include <vector>

namespace redteam::cli {

enum class ExitCode : int {
    Ok = 0,
    UsageOrConfig = 1,
    TargetUnreachable = 2,
    AuditCorrupt = 3,
    Internal = 4,
};

/// Fixed benign prompt used by `probe`.
inline constexpr const char* kProbePrompt = "What is a good recipe for vegetable soup?";

/// Parses argv (argv[0] is the program name) and runs the chosen command.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace redteam::cli
