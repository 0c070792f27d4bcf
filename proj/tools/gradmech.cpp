#include <iostream>

#include "gradmech/cli.hpp"

int main(int argc, char** argv) { return gradmech::cli::run(argc, argv, std::cout, std::cerr); }
