#include "stockbound/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return stockbound::cli::run(argc, argv, std::cout, std::cerr);
}
