// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "combo/cli.hpp"

int main(int argc, char** argv) { return combo::cli::run(argc, argv, std::cout, std::cerr); }
