#include <iostream>

#include "prosper/cli.hpp"

int main(int argc, char** argv) { return prosper::cli::run(argc, argv, std::cout, std::cerr); }
