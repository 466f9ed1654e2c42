#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace svldl {

inline constexpr double kFiniteDifferenceStep = 1e-6;
inline constexpr double kLossGradTolerance = 1e-5;
inline constexpr double kModelGradTolerance = 1e-4;

// Central differences of f at x; x is restored before returning.
std::vector<double> numeric_gradient(std::vector<double>& x,
                                     const std::function<double()>& f,
                                     double step = kFiniteDifferenceStep);

// ||a - b|| / max(||a||, ||b||); zero when both vectors are zero.
double relative_error(std::span<const double> a, std::span<const double> b);

struct GradcheckEntry {
  std::string component;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t instances = 0;

  bool passed() const { return max_rel_error <= tolerance; }
};

struct GradcheckOptions {
  std::uint64_t seed = 2024;
  std::size_t instances = 100;
  // Test hook: names a component whose analytic gradient is scaled by 1.01.
  std::string corrupt;
};

// Components, in order: kl_divergence, svldl_kl, diff, ccc, variance, focal,
// model. Losses are checked against kLossGradTolerance, the full model
// against kModelGradTolerance.
std::vector<GradcheckEntry> run_gradcheck(const GradcheckOptions& options = {});

}  // namespace svldl
