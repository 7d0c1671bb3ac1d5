#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace stackopt {

/// Runs the command line (args excludes the program name). Returns the exit
/// code; failures print one line "stackopt: error: <kind>: <message>" to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stackopt
