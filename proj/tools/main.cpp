#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return mpvaa::cli::dispatch(argc, argv, std::cout, std::cerr); }
