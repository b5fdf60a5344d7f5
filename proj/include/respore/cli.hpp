#pragma once

namespace respore {

// Entry point behind the `respore` binary: synth | train | detect | eval |
// sweep. Returns the process exit status (nonzero exactly when an error
// case fired).
int run_cli(int argc, const char* const* argv);

}  // namespace respore
