#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace recprompt::cli {

// Parses argv and runs one subcommand. Returns the process exit code:
// 0 success, 1 config error, 2 data error, 3 service error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace recprompt::cli
