#include <iostream>

#include "ascore/cli/app.hpp"

int main(int argc, char** argv) { return ascore::cli::run(argc, argv, std::cout, std::cerr); }
