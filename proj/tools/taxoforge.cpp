#include <iostream>

#include "taxoforge/cli.hpp"

int main(int argc, char** argv) { return taxoforge::run_cli(argc, argv, std::cout, std::cerr); }
