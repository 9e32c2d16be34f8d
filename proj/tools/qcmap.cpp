#include <iostream>

#include "qcmap/cli.hpp"

int main(int argc, char** argv) { return qcmap::cli::run(argc, argv, std::cout, std::cerr); }
