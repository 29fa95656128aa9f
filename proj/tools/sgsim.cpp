#include <iostream>

#include "sgc/cli.hpp"

int main(int argc, char** argv) { return sgc::cli_main(argc, argv, std::cout, std::cerr); }
