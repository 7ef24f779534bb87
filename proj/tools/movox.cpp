// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/cli/app.hpp"

int main(int argc, char** argv) { return movox::cli::run(argc, argv); }
