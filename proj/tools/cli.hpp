#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fcid::cli {

/// Runs one command (arguments without the program name). Returns 0 on
/// success, 2 on invalid arguments or inputs, 1 on runtime failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fcid::cli
