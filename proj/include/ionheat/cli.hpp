#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ionheat {

// Command-line entry point. args excludes the program name.
// Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure
// (for `reproduce`: at least one criterion failed).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ionheat
