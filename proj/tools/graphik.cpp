#include "graphik/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return graphik::dispatch(argc, argv, std::cout, std::cerr); }
