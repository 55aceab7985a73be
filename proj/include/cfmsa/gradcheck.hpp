#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfmsa/model.hpp"

namespace cfmsa {

struct GradCheckOptions {
  std::size_t points = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-5;
  double step = 1e-5;
  ModelDims dims{6, 5, 8, 3};
};

// One analytic-vs-central-difference comparison family, e.g. L_ti w.r.t. c.
struct GradCheckResult {
  std::string loss;
  std::string group;
  std::size_t points = 0;
  double max_relative_error = 0.0;
  bool passed = false;
};

// Compares every analytic gradient exposed by the loss code against
// finite_diff_grad at `points` random parameter points. Relative error is
// ||analytic - numeric|| / max(||analytic||, ||numeric||) per point and group.
std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& options);

}  // namespace cfmsa
