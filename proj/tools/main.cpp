#include <iostream>

#include "localembed/cli.hpp"

int main(int argc, char** argv) { return localembed::run_cli(argc, argv, std::cout, std::cerr); }
