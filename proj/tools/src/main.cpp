#include <cstdlib>
#include <iostream>

#include "endgen/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return endgen::cli::run(args, std::cout, std::cerr, std::getenv("ENDGEN_SEED"));
}
