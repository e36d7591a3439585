#include <iostream>

#include "brl/cli.hpp"

int main(int argc, char** argv) { return brl::cli::run(argc, argv, std::cout, std::cerr); }
