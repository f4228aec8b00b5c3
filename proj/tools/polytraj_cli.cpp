#include <iostream>

#include "polytraj/commands.hpp"

int main(int argc, char** argv) { return polytraj::cli::run_cli(argc, argv, std::cout, std::cerr); }
