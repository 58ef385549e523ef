#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lipcert::cli {

/// Runs one command line (args[0] is the program name). Returns 0 on success,
/// 1 on invalid input or usage errors, 2 on numeric or internal failures.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

std::string version();

}  // namespace lipcert::cli
