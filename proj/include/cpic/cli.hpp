#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cpic::cli {

/// Exit codes: 0 success, 2 usage or configuration error, 1 runtime error.
int run(int argc, char** argv);
/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cpic::cli
