// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  return linkguard::cli::run(argc, argv, std::cin, std::cout, std::cerr);
}
