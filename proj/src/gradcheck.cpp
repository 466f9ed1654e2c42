#include "svldl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "svldl/data.hpp"
#include "svldl/losses.hpp"
#include "svldl/model.hpp"
#include "svldl/training.hpp"

namespace svldl {

std::vector<double> numeric_gradient(std::vector<double>& x,
                                     const std::function<double()>& f, double step) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f();
    x[i] = saved - step;
    const double down = f();
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  if (denom == 0.0) return std::sqrt(diff) == 0.0 ? 0.0 : INFINITY;
  return std::sqrt(diff) / denom;
}

namespace {

class Checker {
 public:
  explicit Checker(const GradcheckOptions& options)
      : options_(options), rng_(options.seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::vector<double> random_logits(int n, double scale = 2.0) {
    std::vector<double> z(static_cast<std::size_t>(n));
    for (double& v : z) v = uniform(-scale, scale);
    return z;
  }

  // Runs `instances` trials of make_trial, which returns (analytic, numeric).
  template <typename Trial>
  GradcheckEntry run(const std::string& name, double tolerance, Trial make_trial) {
    GradcheckEntry entry{name, 0.0, tolerance, options_.instances};
    const double scale = options_.corrupt == name ? 1.01 : 1.0;
    for (std::size_t i = 0; i < options_.instances; ++i) {
      auto [analytic, numeric] = make_trial();
      for (double& g : analytic) g *= scale;
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic, numeric));
    }
    return entry;
  }

 private:
  const GradcheckOptions& options_;
  std::mt19937_64 rng_;
};

using Pair = std::pair<std::vector<double>, std::vector<double>>;

}  // namespace

std::vector<GradcheckEntry> run_gradcheck(const GradcheckOptions& options) {
  Checker ck(options);
  std::vector<GradcheckEntry> entries;

  entries.push_back(ck.run("kl_divergence", kLossGradTolerance, [&]() -> Pair {
    const int K = ck.integer(3, 12);
    const auto target = LabelDistribution::from_logits(ck.random_logits(K, 3.0));
    auto z = ck.random_logits(K);
    const auto pred = LabelDistribution::from_logits(z);
    auto analytic = softmax_backward(pred.probs(), kl_divergence(target, pred).grad);
    auto numeric = numeric_gradient(z, [&] {
      return kl_divergence(target, LabelDistribution::from_logits(z)).value;
    });
    return {analytic, numeric};
  }));

  entries.push_back(ck.run("svldl_kl", kLossGradTolerance, [&]() -> Pair {
    const int K = ck.integer(6, 16);
    const std::size_t n = static_cast<std::size_t>(ck.integer(1, 4));
    const auto candidates = make_candidate_set(0.3, 3.0, 0.3, true);
    std::vector<double> ages(n);
    for (double& a : ages) a = ck.uniform(1.0, K);
    std::vector<double> z = ck.random_logits(static_cast<int>(n) * K);
    auto predictions = [&] {
      std::vector<LabelDistribution> out;
      for (std::size_t i = 0; i < n; ++i) {
        out.push_back(LabelDistribution::from_logits(
            std::span<const double>(z).subspan(i * static_cast<std::size_t>(K),
                                               static_cast<std::size_t>(K))));
      }
      return out;
    };
    const auto preds = predictions();
    const auto base = svldl_kl_loss(ages, preds, candidates, Backend::serial);
    std::vector<double> analytic;
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = softmax_backward(preds[i].probs(), base.grads[i]);
      analytic.insert(analytic.end(), g.begin(), g.end());
    }
    auto numeric = numeric_gradient(z, [&] {
      return svldl_kl_loss(ages, predictions(), candidates, Backend::serial).loss;
    });
    return {analytic, numeric};
  }));

  entries.push_back(ck.run("diff", kLossGradTolerance, [&]() -> Pair {
    const int K = ck.integer(3, 20);
    const double mu = ck.uniform(1.0, K);
    const double s = ck.uniform(0.2, 10.0);
    auto z = ck.random_logits(K);
    const auto pred = LabelDistribution::from_logits(z);
    auto analytic = softmax_backward(pred.probs(), diff_loss(mu, s, pred).grad);
    auto numeric = numeric_gradient(z, [&] {
      return diff_loss(mu, s, LabelDistribution::from_logits(z)).value;
    });
    return {analytic, numeric};
  }));

  entries.push_back(ck.run("ccc", kLossGradTolerance, [&]() -> Pair {
    const std::size_t n = static_cast<std::size_t>(ck.integer(2, 12));
    std::vector<double> truth(n), predicted(n);
    for (double& t : truth) t = ck.uniform(18.0, 70.0);
    for (std::size_t i = 0; i < n; ++i) predicted[i] = truth[i] + ck.uniform(-15.0, 15.0);
    auto analytic = ccc_loss(truth, predicted).grad;
    auto numeric = numeric_gradient(predicted, [&] { return ccc_loss(truth, predicted).value; });
    return {analytic, numeric};
  }));

  entries.push_back(ck.run("variance", kLossGradTolerance, [&]() -> Pair {
    const int K = ck.integer(2, 30);
    auto z = ck.random_logits(K);
    const auto pred = LabelDistribution::from_logits(z);
    auto analytic = softmax_backward(pred.probs(), variance_loss(pred).grad);
    auto numeric = numeric_gradient(z, [&] {
      return variance_loss(LabelDistribution::from_logits(z)).value;
    });
    return {analytic, numeric};
  }));

  entries.push_back(ck.run("focal", kLossGradTolerance, [&]() -> Pair {
    static constexpr double kGammas[] = {0.0, 0.5, 1.0, 2.0, 5.0, 10.0};
    const double gamma = kGammas[ck.integer(0, 5)];
    const int gender = ck.integer(0, 1);
    auto z = ck.random_logits(2);
    auto loss_at = [&] {
      const auto p = softmax(z);
      return focal_loss(gender, std::span<const double, 2>(p.data(), 2), gamma);
    };
    auto analytic = loss_at().grad;
    auto numeric = numeric_gradient(z, [&] { return loss_at().value; });
    return {analytic, numeric};
  }));

  entries.push_back(ck.run("model", kModelGradTolerance, [&]() -> Pair {
    const ModelConfig cfg{10, 2, 4, 8};
    auto params = ModelParameters::initialize(
        cfg, static_cast<std::uint64_t>(ck.integer(0, 1 << 30)));
    // Non-uniform fusion weights so their gradient is exercised away from 1/L.
    for (double& w : params.layer_weights.data) w = ck.uniform(0.3, 1.2);
    const std::size_t n = 3;
    std::vector<Sample> batch(n);
    for (std::size_t i = 0; i < n; ++i) {
      batch[i].id = "g" + std::to_string(i);
      batch[i].features = FeatureSequence(2, 3, 4);
      for (float& v : batch[i].features.values) v = static_cast<float>(ck.uniform(-1.5, 1.5));
      batch[i].age = ck.uniform(1.0, cfg.K);
      batch[i].gender = ck.integer(0, 1);
    }
    const auto candidates = make_candidate_set(0.5, 3.0, 0.5, true);
    const LossWeights weights{};
    const auto base = batch_gradient(batch, params, candidates, weights,
                                     {Backend::serial, {}});
    // Hold s* fixed so the objective is smooth in the parameters.
    const auto pinned = base.loss.report.selected_variances;
    HybridOptions pinned_options{Backend::serial, pinned};

    std::vector<double> flat;
    for (const Tensor* t : params.tensors()) flat.insert(flat.end(), t->data.begin(), t->data.end());
    std::vector<double> analytic;
    for (const Tensor* t : base.grads.tensors()) {
      analytic.insert(analytic.end(), t->data.begin(), t->data.end());
    }
    auto numeric = numeric_gradient(flat, [&] {
      std::size_t offset = 0;
      for (Tensor* t : params.tensors()) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), t->data.size(),
                    t->data.begin());
        offset += t->data.size();
      }
      std::vector<LossInput> inputs;
      for (const auto& s : batch) {
        auto fwd = forward(s.features, params, Backend::serial);
        inputs.push_back({s.age, s.gender, fwd.age_dist, fwd.gender_probs});
      }
      return hybrid_loss(inputs, candidates, weights, pinned_options).report.total;
    });
    return {analytic, numeric};
  }));

  return entries;
}

}  // namespace svldl
