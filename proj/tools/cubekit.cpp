#include <iostream>
#include <string>
#include <vector>

#include "cubekit/cli.hpp"

int main(int argc, char** argv) {
  return cubekit::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
