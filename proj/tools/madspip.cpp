#include <iostream>
#include <string>
#include <vector>

#include "madspip/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return madspip::cli::run(args, std::cout, std::cerr);
}
