#include <iostream>

#include "sair/cli.hpp"

int main(int argc, char** argv)
{
    return sair::run_cli(std::vector<std::string>(argv, argv + argc), std::cout,
                         std::cerr);
}
