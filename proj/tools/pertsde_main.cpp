#include <iostream>

#include "pertsde/cli.hpp"

int main(int argc, char** argv) { return pertsde::cli::main(argc, argv, std::cout, std::cerr); }
