#include <iostream>

#include "skipkit/cli.hpp"

int main(int argc, char** argv) { return skipkit::run_cli(argc, argv, std::cout, std::cerr); }
