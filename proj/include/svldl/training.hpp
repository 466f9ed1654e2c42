#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "svldl/config.hpp"
#include "svldl/data.hpp"
#include "svldl/losses.hpp"
#include "svldl/metrics.hpp"
#include "svldl/model.hpp"

namespace svldl {

// One SGD step on a batch: forward every sample, hybrid loss, backward, and
// the momentum update. Per-sample gradients are summed in sample order, so
// the result does not depend on the thread count. Throws NumericError (with
// params untouched) on a non-finite gradient.
LossReport train_step(std::span<const Sample> batch, ModelParameters& params,
                      OptimizerState& optimizer,
                      const VarianceCandidateSet& candidates,
                      const LossWeights& weights,
                      Backend backend = Backend::parallel);

// Gradient of the hybrid loss over a batch, without updating anything.
struct BatchGradient {
  HybridLoss loss;
  ModelParameters grads;
};
BatchGradient batch_gradient(std::span<const Sample> batch,
                             const ModelParameters& params,
                             const VarianceCandidateSet& candidates,
                             const LossWeights& weights,
                             const HybridOptions& options = {});

struct EpochSummary {
  int epoch = 0;
  bool finetune = false;
  // Per-component means over the epoch's batches, weighted by batch size.
  LossReport report;
};

using EpochCallback = std::function<void(const EpochSummary&)>;

// Full training run: seeded initialization, per-epoch shuffling, random
// cropping, and the optional fine-tune phase.
ModelParameters train_model(std::span<const Sample> samples, const RunConfig& config,
                            const EpochCallback& on_epoch = {},
                            Backend backend = Backend::parallel);

struct PredictionSet {
  std::vector<double> true_ages;
  std::vector<double> predicted_ages;
  std::vector<LabelDistribution> distributions;
};

PredictionSet predict_all(const ModelParameters& params, std::span<const Sample> samples,
                          Backend backend = Backend::parallel);

EvalReport evaluate_model(const ModelParameters& params, std::span<const Sample> samples,
                          double q = 2.0, Backend backend = Backend::parallel);

}  // namespace svldl
