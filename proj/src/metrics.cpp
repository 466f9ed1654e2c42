#include "svldl/metrics.hpp"

#include <cmath>

#include "svldl/error.hpp"
#include "svldl/kernels.hpp"

namespace svldl {

double mae(std::span<const double> true_ages, std::span<const double> predicted_ages) {
  if (true_ages.size() != predicted_ages.size()) {
    throw DomainError("mae: vectors differ in length");
  }
  if (true_ages.empty()) throw DomainError("mae of an empty set");
  double sum = 0.0;
  for (std::size_t i = 0; i < true_ages.size(); ++i) {
    sum += std::abs(predicted_ages[i] - true_ages[i]);
  }
  return sum / static_cast<double>(true_ages.size());
}

double pcc(std::span<const double> true_ages, std::span<const double> predicted_ages) {
  const std::size_t n = true_ages.size();
  if (n != predicted_ages.size()) throw DomainError("pcc: vectors differ in length");
  if (n < 2) throw DomainError("pcc needs at least two samples");
  double mean_t = 0.0;
  double mean_p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_t += true_ages[i];
    mean_p += predicted_ages[i];
  }
  mean_t /= static_cast<double>(n);
  mean_p /= static_cast<double>(n);
  double ss_t = 0.0;
  double ss_p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ss_t += (true_ages[i] - mean_t) * (true_ages[i] - mean_t);
    ss_p += (predicted_ages[i] - mean_p) * (predicted_ages[i] - mean_p);
  }
  const double dof = static_cast<double>(n - 1);
  const double sd_t = std::sqrt(ss_t / dof);
  const double sd_p = std::sqrt(ss_p / dof);
  if (!(sd_t > 0.0) || !(sd_p > 0.0)) {
    throw DomainError("pcc undefined for a constant vector");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += ((predicted_ages[i] - mean_p) / sd_p) * ((true_ages[i] - mean_t) / sd_t);
  }
  return sum / dof;
}

UnimodalStats unimodal_coefficient(std::span<const LabelDistribution> dists, double q,
                                   Backend backend) {
  if (!(q > 0.0)) throw DomainError("unimodal coefficient needs q > 0");
  if (dists.empty()) throw DomainError("unimodal coefficient of an empty set");
  const auto counts = kernels::valley_counts(dists, q, backend);
  double sum = 0.0;
  for (int c : counts) sum += c;
  UnimodalStats out;
  out.eta_q = sum / static_cast<double>(counts.size());
  out.mode_count = out.eta_q + 1.0;
  return out;
}

}  // namespace svldl
