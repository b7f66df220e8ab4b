// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "gspace/cli.hpp"

int main(int argc, char** argv) { return gspace::cli::run(argc, argv, std::cout, std::cerr); }
