#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace advm {

/// `advm` command line. `args` excludes the program name. Exit codes:
/// 0 success, 1 usage error or divergence, 2 parse/validation errors,
/// 3 quiescent-stuck, 4 execution error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace advm
