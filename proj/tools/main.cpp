#include <iostream>

#include "filtnet/cli.hpp"

int main(int argc, char** argv) { return filtnet::cli::run(argc, argv, std::cout, std::cerr); }
