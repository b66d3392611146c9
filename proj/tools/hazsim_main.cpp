#include <iostream>

#include "hazsim/cli.hpp"

int main(int argc, char** argv) {
  return hazsim::cli::dispatch(argc, argv, std::cout, std::cerr);
}
