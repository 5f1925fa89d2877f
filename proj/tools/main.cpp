// SPDX-License-Identifier: Apache-2.0
#include "loadcast/cli.hpp"

#include <iostream>

int main(int argc, char **argv) {
  return loadcast::cli::run(argc, argv, std::cout, std::cerr);
}
