#pragma once

#include <ostream>

namespace hit {

// Process exit codes, one per error class.
enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitConfig = 2,       // bad flags, ConfigError
  kExitData = 3,         // DataError, SchemaError, IoError, DimensionError
  kExitNumeric = 4,      // NumericError, DivergenceError
  kExitServing = 5,      // ServingError
  kExitVerification = 6  // verify-cache found a mismatch
};

// Entry point of the `hit` binary. Results go to `out` as JSON, progress and
// errors to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hit
