#include <iostream>

#include "hyperformer_cli/commands.hpp"

int main(int argc, char** argv) {
  return hyperformer::cli::run_cli(argc, argv, std::cout, std::cerr);
}
