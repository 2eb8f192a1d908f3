#include <iostream>

#include "dve/cli/commands.hpp"

int main(int argc, char** argv) { return dve::cli::run(argc, argv, std::cout, std::cerr); }
