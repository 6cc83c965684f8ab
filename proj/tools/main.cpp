#include <iostream>
#include <string>
#include <vector>

#include "bemag/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return bemag::cli::dispatch(std::move(args), std::cout, std::cerr);
}
