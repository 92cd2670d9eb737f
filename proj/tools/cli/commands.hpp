#pragma once

namespace trajkit::cli {

enum ExitCode : int { kOk = 0, kDomainError = 1, kUsageError = 2 };

/// Entry point of the trajkit executable.
int run(int argc, const char* const* argv);

}  // namespace trajkit::cli
