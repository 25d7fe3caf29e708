#include <iostream>

#include "histolime_cli/app.hpp"

int main(int argc, char** argv) { return histolime::cli::run(argc, argv, std::cout, std::cerr); }
