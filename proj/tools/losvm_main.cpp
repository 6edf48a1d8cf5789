#include <iostream>

#include "losvm/cli.hpp"

int main(int argc, char** argv) { return losvm::run_cli(argc, argv, std::cout, std::cerr); }
