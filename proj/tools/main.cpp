#include <iostream>

#include "cmta/cli.hpp"

int main(int argc, char** argv) { return cmta::run_cli(argc, argv, std::cout, std::cerr); }
