#include "svldl/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "svldl/error.hpp"

namespace svldl {

namespace {

constexpr double kSumTolerance = 1e-9;

}  // namespace

LabelDistribution::LabelDistribution(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.size() < 2) {
    throw DomainError("label distribution needs K >= 2, got " +
                      std::to_string(probs_.size()));
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DomainError("label distribution entry outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw DomainError("label distribution does not sum to 1 (sum = " +
                      std::to_string(sum) + ")");
  }
}

LabelDistribution LabelDistribution::uniform(int K) {
  if (K < 2) throw DomainError("K must be >= 2");
  return LabelDistribution(std::vector<double>(static_cast<std::size_t>(K), 1.0 / K));
}

LabelDistribution LabelDistribution::one_hot(int K, int label) {
  if (K < 2 || label < 1 || label > K) {
    throw DomainError("one-hot label outside 1..K");
  }
  std::vector<double> probs(static_cast<std::size_t>(K), 0.0);
  probs[static_cast<std::size_t>(label - 1)] = 1.0;
  return LabelDistribution(std::move(probs));
}

LabelDistribution LabelDistribution::from_logits(std::span<const double> logits) {
  return LabelDistribution(softmax(logits));
}

VarianceCandidateSet::VarianceCandidateSet(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.empty()) throw DomainError("empty variance candidate set");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) {
      throw DomainError("variance candidates must be positive and finite");
    }
    if (i > 0 && !(values_[i] > values_[i - 1])) {
      throw DomainError("variance candidates must be strictly ascending");
    }
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

LabelDistribution gaussian_label_distribution(double mu, double s, int K) {
  if (K < 2) throw DomainError("K must be >= 2");
  if (!(mu >= 1.0 && mu <= K)) {
    throw DomainError("gaussian mean " + std::to_string(mu) + " outside [1, " +
                      std::to_string(K) + "]");
  }
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw DomainError("gaussian width s must be positive");
  }
  // Shift exponents by their maximum so that narrow widths do not underflow
  // every bin; the shift cancels in the normalization.
  std::vector<double> probs(static_cast<std::size_t>(K));
  double max_exponent = -INFINITY;
  for (int k = 1; k <= K; ++k) {
    const double d = k - mu;
    probs[static_cast<std::size_t>(k - 1)] = -(d * d) / s;
    max_exponent = std::max(max_exponent, probs[static_cast<std::size_t>(k - 1)]);
  }
  double sum = 0.0;
  for (double& v : probs) {
    v = std::exp(v - max_exponent);
    sum += v;
  }
  for (double& v : probs) v /= sum;
  return LabelDistribution(std::move(probs));
}

double distribution_mean(const LabelDistribution& d) {
  double mean = 0.0;
  const auto probs = d.probs();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    mean += static_cast<double>(i + 1) * probs[i];
  }
  return mean;
}

double distribution_std(const LabelDistribution& d) {
  const double mean = distribution_mean(d);
  double var = 0.0;
  const auto probs = d.probs();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double dev = static_cast<double>(i + 1) - mean;
    var += probs[i] * dev * dev;
  }
  return std::sqrt(var);
}

FirstDifference first_difference(const LabelDistribution& d) {
  const auto probs = d.probs();
  FirstDifference out;
  out.deltas.resize(probs.size() - 1);
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    out.deltas[i] = probs[i + 1] - probs[i];
  }
  return out;
}

VarianceCandidateSet make_candidate_set(double start, double stop, double step,
                                        bool squared) {
  if (!(start > 0.0) || !(stop >= start) || !(step > 0.0) ||
      !std::isfinite(stop) || !std::isfinite(step)) {
    throw DomainError("candidate grid needs 0 < start <= stop and step > 0");
  }
  const double span = (stop - start) / step;
  const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
  std::vector<double> values;
  values.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = start + static_cast<double>(i) * step;
    values.push_back(squared ? x * x : x);
  }
  return VarianceCandidateSet(std::move(values));
}

}  // namespace svldl
