#include <iostream>

#include "tsc/cli.hpp"

int main(int argc, char** argv) {
  return tsc::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
