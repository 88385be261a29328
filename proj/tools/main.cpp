#include <iostream>

#include "mixscope/cli.hpp"

int main(int argc, char** argv) { return mixscope::run_cli(argc, argv, std::cout, std::cerr); }
