#pragma once

namespace foct {

// Command-line entry: gen-data, depth, train, eval, probe, ablate.
// Returns 0 on success, 1 on usage errors, 2 on runtime errors.
int run_cli(int argc, char** argv);

}  // namespace foct
