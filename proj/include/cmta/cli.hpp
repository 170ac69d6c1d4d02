#pragma once

#include <ostream>

namespace cmta {

enum ExitCode : int {
  kExitOk = 0,
  kExitDataInvalid = 1,
  kExitConfigError = 2,
  kExitIoError = 3,
};

// Entry point of the `cmta` tool. Subcommands: gen-synthetic, train, eval,
// predict, dump-features, validate-data. Never throws; failures map to the
// exit codes above with a message on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cmta
