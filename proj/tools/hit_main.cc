#include <iostream>

#include "hit/cli/commands.h"

int main(int argc, char** argv) { return hit::run_cli(argc, argv, std::cout, std::cerr); }
