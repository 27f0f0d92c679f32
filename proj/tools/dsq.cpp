#include <iostream>

#include "dsq/cli.hpp"

int main(int argc, char** argv) { return dsq::cli::run(argc, argv, std::cout, std::cerr); }
