#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace seal::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitUsage = 2,     // unknown flag, missing or malformed argument
    kExitIo = 3,        // file that cannot be opened or written
    kExitInvalid = 4,   // schema mismatch, malformed input, out-of-range configuration
    kExitNumeric = 5,   // training diverged or a system was singular
};

/// Name of the snapshot every artifact-producing command writes into --out.
inline constexpr const char* kRunConfigFile = "run_config.json";

/// Runs one subcommand. `args` excludes the program name. Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seal::cli
