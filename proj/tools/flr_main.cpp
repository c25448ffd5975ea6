#include <iostream>

#include "flr/cli.hpp"

int main(int argc, char** argv) { return flr::run_cli(argc, argv, std::cout, std::cerr); }
