#include "mbda/cli.hpp"

#include <iostream>

int main(int argc, char **argv) { return mbda::cli::main(argc, argv, std::cout, std::cerr); }
