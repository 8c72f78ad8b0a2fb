#include <iostream>
#include <string>
#include <vector>

#include "lungnet/cli/Commands.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lungnet::cli::runCli(args, std::cout, std::cerr);
}
