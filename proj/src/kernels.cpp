#include "svldl/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace svldl::kernels {

namespace {

// exp() of anything below this is zero in double precision.
constexpr double kExpUnderflow = -745.2;

void log_clamped(std::span<const double> probs, std::vector<double>& out) {
  out.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = std::log(std::max(probs[i], kProbabilityFloor));
  }
}

// KL of the renormalized Gaussian at (mu, s) against log_predicted. The
// target's logarithm is taken analytically from the shifted exponent, so
// only one exp per bin is needed.
double divergence_from_logs(double mu, double s,
                            std::span<const double> log_predicted) {
  const std::size_t K = log_predicted.size();
  // The maximum exponent sits at the bin nearest to mu.
  const double nearest = std::clamp(std::round(mu), 1.0, static_cast<double>(K));
  const double max_exponent = -((nearest - mu) * (nearest - mu)) / s;
  double z = 0.0;
  double weighted_log_ratio = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    const double d = static_cast<double>(i + 1) - mu;
    const double x = -(d * d) / s - max_exponent;
    if (x < kExpUnderflow) continue;
    const double w = std::exp(x);
    z += w;
    weighted_log_ratio += w * (x - log_predicted[i]);
  }
  // sum_k t_k (log t_k - log p_k) with t_k = w_k / z and log t_k = x_k - log z.
  return weighted_log_ratio / z - std::log(z);
}

int valley_count_impl(const LabelDistribution& d, double q) {
  const double mean = distribution_mean(d);
  const double sd = distribution_std(d);
  const int K = d.K();
  const double k_min = std::max(1.0, mean - q * sd);
  const double k_max = std::min(mean + q * sd, static_cast<double>(K - 1));
  const auto probs = d.probs();
  int count = 0;
  // Label k (1-based) needs delta(k) and delta(k + 1), so k + 1 <= K - 1.
  for (int k = 1; k + 1 <= K - 1; ++k) {
    if (k < k_min || k + 1 > k_max) continue;
    const double delta_k = probs[static_cast<std::size_t>(k)] -
                           probs[static_cast<std::size_t>(k - 1)];
    const double delta_next = probs[static_cast<std::size_t>(k + 1)] -
                              probs[static_cast<std::size_t>(k)];
    if (delta_k < 0.0 && delta_next > 0.0) ++count;
  }
  return count;
}

}  // namespace

double candidate_divergence(double mu, double s,
                            std::span<const double> predicted) {
  std::vector<double> log_p;
  log_clamped(predicted, log_p);
  return divergence_from_logs(mu, s, log_p);
}

int valley_count(const LabelDistribution& d, double q) {
  return valley_count_impl(d, q);
}

namespace serial {

std::vector<double> candidate_divergences(double mu,
                                          std::span<const double> candidates,
                                          std::span<const double> predicted) {
  std::vector<double> log_p;
  log_clamped(predicted, log_p);
  std::vector<double> out(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out[i] = divergence_from_logs(mu, candidates[i], log_p);
  }
  return out;
}

void fuse_layers(std::span<const float> features, std::size_t layers,
                 std::size_t frames, std::size_t dims,
                 std::span<const double> weights, std::span<double> out) {
  const std::size_t plane = frames * dims;
  for (std::size_t j = 0; j < plane; ++j) {
    double acc = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
      acc += weights[l] * static_cast<double>(features[l * plane + j]);
    }
    out[j] = acc;
  }
}

std::vector<int> valley_counts(std::span<const LabelDistribution> dists,
                               double q) {
  std::vector<int> out(dists.size());
  for (std::size_t i = 0; i < dists.size(); ++i) {
    out[i] = valley_count_impl(dists[i], q);
  }
  return out;
}

}  // namespace serial

namespace omp {

std::vector<double> candidate_divergences(double mu,
                                          std::span<const double> candidates,
                                          std::span<const double> predicted) {
  std::vector<double> log_p;
  log_clamped(predicted, log_p);
  std::vector<double> out(candidates.size());
  const auto n = static_cast<long long>(candidates.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] =
        divergence_from_logs(mu, candidates[static_cast<std::size_t>(i)], log_p);
  }
  return out;
}

void fuse_layers(std::span<const float> features, std::size_t layers,
                 std::size_t frames, std::size_t dims,
                 std::span<const double> weights, std::span<double> out) {
  const std::size_t plane = frames * dims;
  const auto n = static_cast<long long>(plane);
#pragma omp parallel for schedule(static)
  for (long long jj = 0; jj < n; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    double acc = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
      acc += weights[l] * static_cast<double>(features[l * plane + j]);
    }
    out[j] = acc;
  }
}

std::vector<int> valley_counts(std::span<const LabelDistribution> dists,
                               double q) {
  std::vector<int> out(dists.size());
  const auto n = static_cast<long long>(dists.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] =
        valley_count_impl(dists[static_cast<std::size_t>(i)], q);
  }
  return out;
}

}  // namespace omp

}  // namespace svldl::kernels
