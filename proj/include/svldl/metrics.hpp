#pragma once

#include <span>

#include "svldl/distributions.hpp"
#include "svldl/exec.hpp"

namespace svldl {

// Mean absolute error in years.
double mae(std::span<const double> true_ages, std::span<const double> predicted_ages);

// Sample Pearson correlation (N - 1 normalization throughout).
double pcc(std::span<const double> true_ages, std::span<const double> predicted_ages);

struct UnimodalStats {
  double eta_q = 0.0;       // mean valley count inside the window
  double mode_count = 1.0;  // eta_q + 1
};

// For each distribution, counts labels k with delta(k) < 0 < delta(k + 1)
// inside [max(1, mean - q sd), min(mean + q sd, K - 1)], requiring k >= lower
// and k + 1 <= upper. Returns the batch mean.
UnimodalStats unimodal_coefficient(std::span<const LabelDistribution> dists, double q,
                                   Backend backend = Backend::parallel);

struct EvalReport {
  double mae = 0.0;
  double pcc = 0.0;
  double eta_q = 0.0;
  double mode_count = 1.0;
  double q = 2.0;
};

}  // namespace svldl
