#pragma once

// Command-line front end. The commands live in a library so tests can run
// them in-process; `perslab` is a thin main() around run().

#include <iosfwd>
#include <string>
#include <vector>

namespace perslab::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2 };

/// Runs one command line (args[0] is the subcommand, no program name).
/// Reports go to `out` unless --out names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace perslab::cli
