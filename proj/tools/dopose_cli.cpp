#include <iostream>

#include "dopose/pipeline.hpp"

int main(int argc, char **argv) { return dopose::run_cli(argc, argv, std::cout, std::cerr); }
