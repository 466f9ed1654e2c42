#include "svldl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svldl/error.hpp"
#include "svldl/kernels.hpp"

namespace svldl {

void LossWeights::validate() const {
  for (double w : {ccc, kl, variance, diff, gender}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DomainError("loss weights must be finite and non-negative");
    }
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw DomainError("focal gamma must be finite and non-negative");
  }
}

std::string_view component_name(Component c) {
  switch (c) {
    case Component::ccc: return "ccc";
    case Component::kl: return "kl";
    case Component::variance: return "variance";
    case Component::diff: return "diff";
    case Component::gender: return "gender";
  }
  return "unknown";
}

std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> grad_probs) {
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += probs[i] * grad_probs[i];
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = probs[i] * (grad_probs[i] - dot);
  }
  return out;
}

LossGrad kl_divergence(const LabelDistribution& target,
                       const LabelDistribution& predicted) {
  if (target.K() != predicted.K()) {
    throw DomainError("KL divergence between distributions of different K");
  }
  LossGrad out;
  out.grad.resize(static_cast<std::size_t>(target.K()));
  for (std::size_t i = 0; i < out.grad.size(); ++i) {
    const double t = target[i];
    const double p = std::max(predicted[i], kProbabilityFloor);
    out.grad[i] = -t / p;
    if (t > 0.0) out.value += t * std::log(t / p);
  }
  return out;
}

VarianceSelection svldl_select(double mu, const VarianceCandidateSet& candidates,
                               const LabelDistribution& predicted,
                               Backend backend) {
  if (!(mu >= 1.0 && mu <= predicted.K())) {
    throw DomainError("age " + std::to_string(mu) + " outside [1, K]");
  }
  const auto divergences = kernels::candidate_divergences(
      mu, candidates.values(), predicted.probs(), backend);
  VarianceSelection best{candidates[0], divergences[0], 0};
  for (std::size_t i = 1; i < divergences.size(); ++i) {
    if (divergences[i] < best.loss) best = {candidates[i], divergences[i], i};
  }
  // Rounding can leave a matching target a hair below zero.
  best.loss = std::max(best.loss, 0.0);
  return best;
}

SvldlBatchLoss svldl_kl_loss(std::span<const double> ages,
                             std::span<const LabelDistribution> predicted,
                             const VarianceCandidateSet& candidates,
                             Backend backend) {
  if (ages.empty()) throw DomainError("svldl_kl_loss on an empty batch");
  if (ages.size() != predicted.size()) {
    throw DomainError("svldl_kl_loss: ages and predictions differ in length");
  }
  const std::size_t n = ages.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  SvldlBatchLoss out;
  out.s_star.resize(n);
  out.grads.resize(n);
  std::vector<double> losses(n);
  kernels::for_each_index(n, backend, [&](std::size_t i) {
    const auto sel =
        svldl_select(ages[i], candidates, predicted[i], Backend::serial);
    const int K = predicted[i].K();
    const auto target = gaussian_label_distribution(ages[i], sel.s_star, K);
    auto kl = kl_divergence(target, predicted[i]);
    for (double& g : kl.grad) g *= inv_n;
    out.s_star[i] = sel.s_star;
    out.grads[i] = std::move(kl.grad);
    losses[i] = sel.loss;
  });
  double sum = 0.0;
  for (double v : losses) sum += v;
  out.loss = sum * inv_n;
  return out;
}

LossGrad diff_loss(const FirstDifference& target,
                   const LabelDistribution& predicted) {
  const auto p = predicted.probs();
  if (target.deltas.size() + 1 != p.size()) {
    throw DomainError("diff_loss: target differences do not match K - 1");
  }
  LossGrad out;
  out.grad.assign(p.size(), 0.0);
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double residual = target.deltas[i] - (p[i + 1] - p[i]);
    out.value += residual * residual;
    out.grad[i] += 2.0 * residual;
    out.grad[i + 1] -= 2.0 * residual;
  }
  return out;
}

LossGrad diff_loss(double mu, double s_star, const LabelDistribution& predicted) {
  if (!(s_star > 0.0)) throw DomainError("diff_loss needs s* > 0");
  const auto target = gaussian_label_distribution(mu, s_star, predicted.K());
  return diff_loss(first_difference(target), predicted);
}

LossGrad ccc_loss(std::span<const double> true_ages,
                  std::span<const double> predicted_ages) {
  const std::size_t n = true_ages.size();
  if (n != predicted_ages.size()) {
    throw DomainError("ccc_loss: vectors differ in length");
  }
  if (n < 2) throw DomainError("ccc_loss needs at least two samples");
  const double inv_n = 1.0 / static_cast<double>(n);
  double mean_t = 0.0;
  double mean_p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_t += true_ages[i];
    mean_p += predicted_ages[i];
  }
  mean_t *= inv_n;
  mean_p *= inv_n;
  double var_t = 0.0;
  double var_p = 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = true_ages[i] - mean_t;
    const double dp = predicted_ages[i] - mean_p;
    var_t += dt * dt;
    var_p += dp * dp;
    cov += dt * dp;
  }
  var_t *= inv_n;
  var_p *= inv_n;
  cov *= inv_n;
  const double bias = mean_p - mean_t;
  const double denom = var_p + var_t + bias * bias;
  if (!(denom > 0.0)) throw DomainError("ccc_loss: zero denominator");

  LossGrad out;
  out.value = 1.0 - 2.0 * cov / denom;
  out.grad.resize(n);
  // d(cov)/dp_i = (t_i - mean_t)/n, d(denom)/dp_i = 2((p_i - mean_p) + bias)/n
  const double scale = -2.0 * inv_n / denom;
  const double ratio = cov / denom;
  for (std::size_t i = 0; i < n; ++i) {
    const double d_denom = 2.0 * ((predicted_ages[i] - mean_p) + bias);
    out.grad[i] = scale * ((true_ages[i] - mean_t) - ratio * d_denom);
  }
  return out;
}

LossGrad variance_loss(const LabelDistribution& predicted) {
  const auto p = predicted.probs();
  double mean = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mean += static_cast<double>(i + 1) * p[i];
  }
  LossGrad out;
  double first_moment = 0.0;  // sum_k p_k (k - mean); zero on the simplex
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dev = static_cast<double>(i + 1) - mean;
    out.value += p[i] * dev * dev;
    first_moment += p[i] * dev;
  }
  out.grad.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double k = static_cast<double>(i + 1);
    const double dev = k - mean;
    out.grad[i] = dev * dev - 2.0 * k * first_moment;
  }
  return out;
}

LossGrad focal_loss(int true_gender, std::span<const double, 2> probs,
                    double gamma) {
  if (true_gender != 0 && true_gender != 1) {
    throw DomainError("gender label must be 0 or 1");
  }
  const double p_t = probs[static_cast<std::size_t>(true_gender)];
  const double one_minus = std::max(1.0 - p_t, 0.0);
  const double log_p = std::log(std::max(p_t, kProbabilityFloor));
  LossGrad out;
  out.value = one_minus > 0.0 ? -std::pow(one_minus, gamma) * log_p : 0.0;
  // dL/dz_t = dL/dp_t * p_t (1 - p_t), folded to avoid (1 - p_t)^(gamma - 1).
  const double d_true = gamma * std::pow(one_minus, gamma) * p_t * log_p -
                        std::pow(one_minus, gamma + 1.0);
  out.grad.assign(2, -d_true);
  out.grad[static_cast<std::size_t>(true_gender)] = d_true;
  return out;
}

HybridLoss hybrid_loss(std::span<const LossInput> batch,
                       const VarianceCandidateSet& candidates,
                       const LossWeights& weights,
                       const HybridOptions& options) {
  weights.validate();
  const std::size_t n = batch.size();
  if (n == 0) throw DomainError("hybrid_loss on an empty batch");
  if (weights.ccc > 0.0 && n < 2) {
    throw DomainError("the CCC term needs a batch of at least two samples");
  }
  if (!options.pinned_variances.empty() && options.pinned_variances.size() != n) {
    throw DomainError("pinned variances must match the batch size");
  }
  const int K = batch[0].age_dist.K();
  for (const auto& item : batch) {
    if (item.age_dist.K() != K) throw DomainError("mixed K within a batch");
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool need_selection = weights.kl > 0.0 || weights.diff > 0.0;

  HybridLoss out;
  out.age_logit_grads.resize(n);
  out.gender_logit_grads.resize(n);
  if (need_selection) out.report.selected_variances.resize(n);

  std::vector<double> predicted_ages(n);
  std::vector<double> true_ages(n);
  for (std::size_t i = 0; i < n; ++i) {
    predicted_ages[i] = distribution_mean(batch[i].age_dist);
    true_ages[i] = batch[i].true_age;
  }
  LossGrad ccc;
  if (weights.ccc > 0.0) ccc = ccc_loss(true_ages, predicted_ages);

  // Per-sample terms; summed below in index order.
  std::vector<double> kl_terms(n, 0.0);
  std::vector<double> var_terms(n, 0.0);
  std::vector<double> diff_terms(n, 0.0);
  std::vector<double> gender_terms(n, 0.0);

  kernels::for_each_index(n, options.backend, [&](std::size_t i) {
    const auto& item = batch[i];
    const auto& pred = item.age_dist;
    std::vector<double> grad_probs(static_cast<std::size_t>(K), 0.0);

    if (need_selection) {
      double s_star = 0.0;
      if (!options.pinned_variances.empty()) {
        s_star = options.pinned_variances[i];
      } else {
        s_star = svldl_select(item.true_age, candidates, pred, Backend::serial).s_star;
      }
      out.report.selected_variances[i] = s_star;
      const auto target = gaussian_label_distribution(item.true_age, s_star, K);
      if (weights.kl > 0.0) {
        const auto kl = kl_divergence(target, pred);
        kl_terms[i] = kl.value;
        for (std::size_t k = 0; k < grad_probs.size(); ++k) {
          grad_probs[k] += weights.kl * inv_n * kl.grad[k];
        }
      }
      if (weights.diff > 0.0) {
        const auto diff = diff_loss(first_difference(target), pred);
        diff_terms[i] = diff.value;
        for (std::size_t k = 0; k < grad_probs.size(); ++k) {
          grad_probs[k] += weights.diff * inv_n * diff.grad[k];
        }
      }
    }
    if (weights.variance > 0.0) {
      const auto var = variance_loss(pred);
      var_terms[i] = var.value;
      for (std::size_t k = 0; k < grad_probs.size(); ++k) {
        grad_probs[k] += weights.variance * inv_n * var.grad[k];
      }
    }
    if (weights.ccc > 0.0) {
      // predicted age = sum_k k p_k
      const double g = weights.ccc * ccc.grad[i];
      for (std::size_t k = 0; k < grad_probs.size(); ++k) {
        grad_probs[k] += g * static_cast<double>(k + 1);
      }
    }
    out.age_logit_grads[i] = softmax_backward(pred.probs(), grad_probs);

    out.gender_logit_grads[i] = {0.0, 0.0};
    if (weights.gender > 0.0) {
      const auto focal = focal_loss(item.gender, item.gender_probs, weights.gamma);
      gender_terms[i] = focal.value;
      for (std::size_t c = 0; c < 2; ++c) {
        out.gender_logit_grads[i][c] = weights.gender * inv_n * focal.grad[c];
      }
    }
  });

  auto mean_of = [inv_n](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum * inv_n;
  };
  auto& report = out.report;
  auto set = [&report](Component c, double v) {
    report.components[static_cast<std::size_t>(c)] = v;
  };
  if (weights.ccc > 0.0) set(Component::ccc, ccc.value);
  if (weights.kl > 0.0) set(Component::kl, mean_of(kl_terms));
  if (weights.variance > 0.0) set(Component::variance, mean_of(var_terms));
  if (weights.diff > 0.0) set(Component::diff, mean_of(diff_terms));
  if (weights.gender > 0.0) set(Component::gender, mean_of(gender_terms));

  const std::array<double, kComponentCount> lambdas = {
      weights.ccc, weights.kl, weights.variance, weights.diff, weights.gender};
  report.total = 0.0;
  for (std::size_t c = 0; c < kComponentCount; ++c) {
    if (report.components[c]) report.total += lambdas[c] * *report.components[c];
  }
  return out;
}

}  // namespace svldl
