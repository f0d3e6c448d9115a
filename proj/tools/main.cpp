#include <iostream>
#include <string>
#include <vector>

#include "redteam/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return redteam::cli::run(args, std::cout, std::cerr);
}
