// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace movox::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Keeps freed tape memory in the process heap instead of returning it to the
/// OS after every step. No-op outside glibc.
void retain_heap();

/// Entry point of the `movox` command-line tool.
int run(int argc, char** argv);

}  // namespace movox::cli
