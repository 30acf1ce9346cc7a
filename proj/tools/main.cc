#include <iostream>

#include "dirrac/cli.hpp"

int main(int argc, char** argv) { return dirrac::cli_main(argc, argv, std::cout, std::cerr); }
