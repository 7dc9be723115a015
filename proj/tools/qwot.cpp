#include <iostream>
#include <string>
#include <vector>

#include "qwot/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return qwot::run_cli(args, std::cout, std::cerr);
}
