#include <iostream>
#include <string>
#include <vector>

#include "ronet/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return ronet::run_cli(args, std::cout, std::cerr);
}
