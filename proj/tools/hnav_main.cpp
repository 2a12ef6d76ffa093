#include <iostream>

#include "hnav/cli.hpp"

int main(int argc, char** argv) {
  return hnav::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
