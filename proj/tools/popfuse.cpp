#include <iostream>
#include <string>
#include <vector>

#include "popfuse/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return popfuse::cli::run(args, std::cerr);
}
