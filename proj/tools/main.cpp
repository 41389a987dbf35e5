#include <iostream>

#include "doubling/cli.hpp"

int main(int argc, char** argv) { return doubling::run_cli(argc, argv, std::cout, std::cerr); }
