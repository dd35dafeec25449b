#pragma once

// Command-line surface: train, compare, cam, mds.

#include <iosfwd>
#include <string>
#include <vector>

namespace tsc::cli {

enum ExitCode : int { ok = 0, usage = 1, data_error = 2, numeric_error = 3 };

/// Runs one command; `args` excludes the program name. Progress and reports
/// go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// `$TSC_OUT_DIR`, or `tsc_out` when unset.
std::string default_out_dir();

}  // namespace tsc::cli
