#include <iostream>
#include <string>
#include <vector>

#include "maxfb/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return maxfb::run_cli(args, std::cout, std::cerr);
}
