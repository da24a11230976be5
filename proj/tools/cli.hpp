#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mpvaa::cli {

// Parses argv (argv[0] is the program name) and runs one subcommand. Returns
// the process exit code: 0 on success, 1 on a pipeline error, 2 on bad usage.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
// `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mpvaa::cli
