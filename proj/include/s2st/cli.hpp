#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace s2st {

// Runs one subcommand. args excludes the program name. Generated text goes
// to `out`, usage and error messages to `err`; logs go to the log sink.
// Returns 0 on success, 1 on a runtime error, 2 on a config or usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace s2st
