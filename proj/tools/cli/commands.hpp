#pragma once

#include <iosfwd>

namespace drmoe::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kValidationError = 2 };

/// Entry point for `drmoe <gen-data|train|eval|ablate> ...`.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace drmoe::cli
