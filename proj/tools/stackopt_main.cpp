#include <iostream>
#include <string>
#include <vector>

#include "stackopt/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return stackopt::run_cli(args, std::cout, std::cerr);
}
