#include <iostream>
#include <string>
#include <vector>

#include "rfmt/harness/commands.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rfmt::run_command(args, std::cout, std::cerr);
}
