#include <iostream>

#include "pdw/cli.hpp"

int main(int argc, char** argv) { return pdw::cli::run(argc, argv, std::cout, std::cerr); }
