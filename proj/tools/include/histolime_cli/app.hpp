#pragma once

#include <ostream>

namespace histolime::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kBackendError = 3, kNumericalError = 4 };

/// Parses arguments and runs one subcommand. Human-readable output goes to
/// `out`, diagnostics to `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace histolime::cli
