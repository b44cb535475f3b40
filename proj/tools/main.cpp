#include <iostream>

#include "abacf/cli.hpp"

int main(int argc, char** argv) { return abacf::cli::run_cli(argc, argv, std::cout, std::cerr); }
