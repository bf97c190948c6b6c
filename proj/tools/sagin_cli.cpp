#include <iostream>

#include "sagin/cli.hpp"

int main(int argc, char** argv) {
  sagin::tune_allocator();
  return sagin::run_cli(argc, argv, std::cout, std::cerr);
}
