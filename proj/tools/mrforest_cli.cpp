#include <iostream>

#include "mrforest/cli.hpp"

int main(int argc, char** argv) { return mrf::run_cli(argc, argv, std::cout, std::cerr); }
