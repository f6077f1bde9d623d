// Command dispatch for the maxent-phs executable.
#pragma once

#include <ostream>

#include "mphs/error.hpp"

namespace mphs::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitSolver = 3,
  kExitInvariant = 4,
};

int exit_code_for(ErrorKind kind) noexcept;

/// Parses argv and runs one command; data goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mphs::cli
