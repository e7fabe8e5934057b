#include <iostream>
#include <string>
#include <vector>

#include "cbilab/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cbilab::run(args, std::cout, std::cerr);
}
