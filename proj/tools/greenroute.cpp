#include <iostream>
#include <string>
#include <vector>

#include "greenroute/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return greenroute::cli::run_cli(args, std::cout, std::cerr);
}
