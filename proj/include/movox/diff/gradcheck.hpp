// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace movox::diff {

/// Value of a scalar function plus the signature of the discrete branches it took
/// (see Tape::note_branch). Functions without kinks can leave `branches` at 0.
struct Evaluation {
  double value = 0.0;
  std::uint64_t branches = 0;
};

/// f(x, grad) returns f(x); when `grad` is non-empty it also writes ∂f/∂x there.
using ScalarFunction = std::function<Evaluation(std::span<const double> x, std::span<double> grad)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::size_t probes = 0;    // coordinates compared
  std::size_t rejected = 0;  // coordinates skipped because x ± eps changed a branch
};

/// Compares the analytic gradient against central differences, all in float64.
/// Per coordinate the error is |analytic − numeric| / max(1, |analytic|); the
/// report carries the maximum. `coordinates` restricts the probes (all if empty).
/// Never throws on disagreement; it only reports.
GradCheckReport finite_diff_check(const ScalarFunction& f, std::span<const double> x, double eps = 1e-4,
                                  std::span<const std::size_t> coordinates = {});

}  // namespace movox::diff
