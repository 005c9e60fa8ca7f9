#include <iostream>

#include "etobs/cli.hpp"

int main(int argc, char** argv) {
    return etobs::cli::run(argc, argv, std::cout, std::cerr);
}
