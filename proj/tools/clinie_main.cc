#include <iostream>
#include <string>
#include <vector>

#include "clinie/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return clinie::run_cli(args, std::cout, std::cerr);
}
