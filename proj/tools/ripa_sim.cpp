// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#include "ripa_cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ripa::cli::run(args);
}
