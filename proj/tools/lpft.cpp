#include "lpft/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return lpft::cli::run(argc, argv, std::cout, std::cerr); }
