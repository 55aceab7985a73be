#include <iostream>

#include "cfmsa/cli.hpp"

int main(int argc, char** argv) { return cfmsa::run_cli(argc, argv, std::cin, std::cout, std::cerr); }
