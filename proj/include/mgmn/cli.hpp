#pragma once

#include <string>
#include <vector>

namespace mgmn::cli {

/// Entry point of the `mgmn` tool. Subcommands: gen, ged, train, eval,
/// score. Returns 0 iff no error record was emitted.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace mgmn::cli
