#include <iostream>

#include "dae/cli.hpp"

int main(int argc, char** argv) { return dae::cli::run_cli(argc, argv, std::cout, std::cerr); }
