#include "ppv/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ppv::cli::main_entry(argc, argv, std::cout, std::cerr); }
