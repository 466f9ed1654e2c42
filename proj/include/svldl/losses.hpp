#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "svldl/distributions.hpp"
#include "svldl/exec.hpp"

namespace svldl {

// Loss value with its gradient. Unless stated otherwise the gradient is
// taken with respect to the predicted probabilities, each treated as a free
// variable.
struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// Weights of the hybrid objective and the focal focus parameter.
struct LossWeights {
  double ccc = 10.0;
  double kl = 1.0;
  double variance = 0.1;
  double diff = 0.1;
  double gender = 0.01;
  double gamma = 10.0;

  // Throws DomainError on a negative weight or gamma.
  void validate() const;
};

enum class Component { ccc = 0, kl, variance, diff, gender };
inline constexpr std::size_t kComponentCount = 5;
inline constexpr std::array<Component, kComponentCount> kAllComponents = {
    Component::ccc, Component::kl, Component::variance, Component::diff,
    Component::gender};

std::string_view component_name(Component c);

struct LossReport {
  double total = 0.0;
  // Unset when the component had zero weight and was skipped.
  std::array<std::optional<double>, kComponentCount> components;
  // s* per sample; empty when neither the KL nor the Diff term ran.
  std::vector<double> selected_variances;

  std::optional<double> component(Component c) const {
    return components[static_cast<std::size_t>(c)];
  }
};

// Chain rule through softmax: maps d/d(probs) to d/d(logits).
std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> grad_probs);

// sum_k t_k log(t_k / p_k), with 0 log 0 = 0 and p clamped at the floor.
LossGrad kl_divergence(const LabelDistribution& target,
                       const LabelDistribution& predicted);

struct VarianceSelection {
  double s_star = 0.0;
  double loss = 0.0;
  std::size_t index = 0;
};

// Exhaustive argmin of KL(gaussian(mu, s) || predicted) over the candidates.
// Ties resolve to the smallest s.
VarianceSelection svldl_select(double mu, const VarianceCandidateSet& candidates,
                               const LabelDistribution& predicted,
                               Backend backend = Backend::parallel);

struct SvldlBatchLoss {
  double loss = 0.0;
  std::vector<double> s_star;
  // Gradient of the batch mean with respect to each sample's probabilities.
  std::vector<std::vector<double>> grads;
};

// Mean selected-variance KL over a batch. The selection is held fixed when
// differentiating.
SvldlBatchLoss svldl_kl_loss(std::span<const double> ages,
                             std::span<const LabelDistribution> predicted,
                             const VarianceCandidateSet& candidates,
                             Backend backend = Backend::parallel);

// Squared error between the first differences of the target Gaussian
// gaussian(mu, s_star) and of the prediction. Per-sample value.
LossGrad diff_loss(double mu, double s_star, const LabelDistribution& predicted);
LossGrad diff_loss(const FirstDifference& target,
                   const LabelDistribution& predicted);

// 1 - concordance correlation, population statistics over the batch.
// Gradient is with respect to the predicted ages.
LossGrad ccc_loss(std::span<const double> true_ages,
                  std::span<const double> predicted_ages);

// sum_k p_k (k - mean)^2. Per-sample value.
LossGrad variance_loss(const LabelDistribution& predicted);

// -(1 - p_t)^gamma log p_t. Gradient is with respect to the two gender
// logits that produced probs.
LossGrad focal_loss(int true_gender, std::span<const double, 2> probs,
                    double gamma);

// One model output paired with its ground truth.
struct LossInput {
  double true_age = 0.0;
  int gender = 0;
  LabelDistribution age_dist;
  std::array<double, 2> gender_probs{0.5, 0.5};
};

struct HybridOptions {
  Backend backend = Backend::parallel;
  // When non-empty, one s* per sample used in place of the argmin.
  std::span<const double> pinned_variances;
};

struct HybridLoss {
  LossReport report;
  std::vector<std::vector<double>> age_logit_grads;
  std::vector<std::array<double, 2>> gender_logit_grads;
};

// Weighted sum of the five batch-mean components. Zero-weight components
// are not evaluated.
HybridLoss hybrid_loss(std::span<const LossInput> batch,
                       const VarianceCandidateSet& candidates,
                       const LossWeights& weights,
                       const HybridOptions& options = {});

}  // namespace svldl
