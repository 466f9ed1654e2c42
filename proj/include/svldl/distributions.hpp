#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace svldl {

// Lower bound applied to probabilities before any logarithm or division.
inline constexpr double kProbabilityFloor = 1e-30;

// Probability mass over the integer labels 1..K. Storage is 0-based:
// probs()[i] is the mass at label i + 1.
class LabelDistribution {
 public:
  // Throws DomainError unless K >= 2, every entry is in [0, 1] and the
  // entries sum to 1 within 1e-9.
  explicit LabelDistribution(std::vector<double> probs);

  static LabelDistribution uniform(int K);
  static LabelDistribution one_hot(int K, int label);
  static LabelDistribution from_logits(std::span<const double> logits);

  int K() const { return static_cast<int>(probs_.size()); }
  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  double at_label(int k) const { return probs_[static_cast<std::size_t>(k - 1)]; }

 private:
  std::vector<double> probs_;
};

// deltas[i] = probs[i + 1] - probs[i]; K - 1 entries.
struct FirstDifference {
  std::vector<double> deltas;
};

// Strictly ascending, positive candidate values for the Gaussian width s.
class VarianceCandidateSet {
 public:
  explicit VarianceCandidateSet(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

// probs[k] proportional to exp(-(k - mu)^2 / s), renormalized over 1..K.
LabelDistribution gaussian_label_distribution(double mu, double s, int K);

double distribution_mean(const LabelDistribution& d);
double distribution_std(const LabelDistribution& d);
FirstDifference first_difference(const LabelDistribution& d);

// Arithmetic grid start, start + step, ... up to stop (inclusive, with a
// small tolerance for accumulated rounding). With squared set, the grid is
// read as standard deviations and each point is stored squared.
VarianceCandidateSet make_candidate_set(double start, double stop, double step,
                                        bool squared = true);

}  // namespace svldl
