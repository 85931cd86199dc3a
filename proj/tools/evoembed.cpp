#include "evoembed/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return evoembed::run_cli(argc, argv, std::cout, std::cerr);
}
