#include <iostream>

#include "segner/cli.hpp"

int main(int argc, char** argv) {
  return segner::run_cli(argc, argv, std::cin, std::cout, std::cerr);
}
