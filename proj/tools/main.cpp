#include <iostream>

#include "cstg/cli.hpp"

int main(int argc, char** argv) {
  return cstg::cli::run_cli(argc, argv, std::cout, std::cerr);
}
