#pragma once

#include <string>
#include <vector>

namespace sessrank::cli {

// Runs one subcommand (gen, prepare, index, mine, augment, train, eval,
// ablate). args excludes the program name. Returns 0 on success, 1 on
// runtime errors, 2 on usage errors.
int dispatch(std::vector<std::string> args);

}  // namespace sessrank::cli
