#pragma once

// Data-parallel inner loops. Each kernel has a plain serial reference in
// kernels::serial and an OpenMP version in kernels::omp with identical
// per-element arithmetic, so the two agree bitwise. The reference versions
// exist for testing and benchmarking.

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#include "svldl/distributions.hpp"
#include "svldl/exec.hpp"

namespace svldl::kernels {

namespace serial {

// KL(gaussian(mu, s_i) || predicted) for every candidate s_i.
std::vector<double> candidate_divergences(double mu,
                                          std::span<const double> candidates,
                                          std::span<const double> predicted);

// out[t, c] = sum_l weights[l] * features[l, t, c]
void fuse_layers(std::span<const float> features, std::size_t layers,
                 std::size_t frames, std::size_t dims,
                 std::span<const double> weights, std::span<double> out);

// Valleys of each distribution inside its q-standard-deviation window.
std::vector<int> valley_counts(std::span<const LabelDistribution> dists,
                               double q);

}  // namespace serial

namespace omp {

std::vector<double> candidate_divergences(double mu,
                                          std::span<const double> candidates,
                                          std::span<const double> predicted);

void fuse_layers(std::span<const float> features, std::size_t layers,
                 std::size_t frames, std::size_t dims,
                 std::span<const double> weights, std::span<double> out);

std::vector<int> valley_counts(std::span<const LabelDistribution> dists,
                               double q);

}  // namespace omp

// KL(gaussian(mu, s) || predicted) for a single s.
double candidate_divergence(double mu, double s,
                            std::span<const double> predicted);

// Valleys of one distribution inside its q-standard-deviation window.
int valley_count(const LabelDistribution& d, double q);

// Runs fn(i) for i in [0, n). Under Backend::parallel iterations are spread
// over OpenMP threads; fn must only write to per-index state. If any
// iteration throws, the exception from the lowest index is rethrown after
// the loop completes.
template <typename Fn>
void for_each_index(std::size_t n, Backend backend, Fn&& fn) {
  if (backend == Backend::serial) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::vector<double> candidate_divergences(
    double mu, std::span<const double> candidates,
    std::span<const double> predicted, Backend backend) {
  return backend == Backend::serial
             ? serial::candidate_divergences(mu, candidates, predicted)
             : omp::candidate_divergences(mu, candidates, predicted);
}

inline void fuse_layers(std::span<const float> features, std::size_t layers,
                        std::size_t frames, std::size_t dims,
                        std::span<const double> weights, std::span<double> out,
                        Backend backend) {
  if (backend == Backend::serial) {
    serial::fuse_layers(features, layers, frames, dims, weights, out);
  } else {
    omp::fuse_layers(features, layers, frames, dims, weights, out);
  }
}

inline std::vector<int> valley_counts(std::span<const LabelDistribution> dists,
                                      double q, Backend backend) {
  return backend == Backend::serial ? serial::valley_counts(dists, q)
                                    : omp::valley_counts(dists, q);
}

}  // namespace svldl::kernels
