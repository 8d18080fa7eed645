// SPDX-License-Identifier: Apache-2.0
#include "gdkm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return gdkm::cli::run(argc, argv, std::cout); }
