#include <iostream>

#include "mxbolo/cli.hpp"

int main(int argc, char** argv) {
    return mxbolo::cli_main(argc, argv, std::cout, std::cerr);
}
