#include <iostream>

#include "regcalc/cli.hpp"

int main(int argc, char** argv) { return regcalc::cli::run(argc, argv, std::cout, std::cerr); }
