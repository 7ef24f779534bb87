// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace movox::diff {

GradCheckReport finite_diff_check(const ScalarFunction& f, std::span<const double> x, double eps,
                                  std::span<const std::size_t> coordinates) {
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> analytic(x.size(), 0.0);
  const Evaluation base = f(point, analytic);

  std::vector<std::size_t> all;
  if (coordinates.empty()) {
    all.resize(x.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    coordinates = all;
  }

  GradCheckReport report;
  for (std::size_t c : coordinates) {
    const double original = point[c];
    point[c] = original + eps;
    const Evaluation plus = f(point, {});
    point[c] = original - eps;
    const Evaluation minus = f(point, {});
    point[c] = original;
    if (plus.branches != base.branches || minus.branches != base.branches) {
      ++report.rejected;
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * eps);
    const double err = std::abs(analytic[c] - numeric) / std::max(1.0, std::abs(analytic[c]));
    ++report.probes;
    if (!(err <= report.max_rel_error)) {  // also catches NaN
      report.max_rel_error = std::isnan(err) ? INFINITY : err;
      report.worst_coordinate = c;
    }
  }
  return report;
}

}  // namespace movox::diff
