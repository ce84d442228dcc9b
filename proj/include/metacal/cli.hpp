#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace metacal {

/// Entry point of the `metacal` tool. `args` excludes the program name.
/// Returns 0 on success, 2 on invalid input or configuration, 1 otherwise.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace metacal
