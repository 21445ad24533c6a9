// SPDX-License-Identifier: Apache-2.0
#include "oprior/cli.hpp"

int main(int argc, char** argv) { return oprior::cli::main(argc, argv); }
