#include "advm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return advm::run_cli(args, std::cout, std::cerr);
}
