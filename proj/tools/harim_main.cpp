#include "cli_app.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return harim::cli::run(argc, argv, {std::cin, std::cout, std::cerr});
}
