#include <iostream>

#include "hsgt/cli.hpp"

int main(int argc, char** argv) { return hsgt::cli::run(argc, argv, std::cout, std::cerr); }
