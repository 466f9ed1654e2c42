#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svldl/distributions.hpp"
#include "svldl/exec.hpp"

namespace svldl {

// Per-layer frame features, layer-major then frame-major:
// values[(l * frames + t) * dims + c].
struct FeatureSequence {
  std::size_t layers = 0;
  std::size_t frames = 0;
  std::size_t dims = 0;
  std::vector<float> values;

  FeatureSequence() = default;
  FeatureSequence(std::size_t layers, std::size_t frames, std::size_t dims);

  float& at(std::size_t l, std::size_t t, std::size_t c) {
    return values[(l * frames + t) * dims + c];
  }
  float at(std::size_t l, std::size_t t, std::size_t c) const {
    return values[(l * frames + t) * dims + c];
  }

  // Throws DomainError on zero layers or frames, a size mismatch, or a
  // non-finite value.
  void validate() const;
};

// Copy of frames [start, start + count) of every layer.
FeatureSequence crop_frames(const FeatureSequence& features, std::size_t start,
                            std::size_t count);

struct ModelConfig {
  int K = 100;
  int layers = 1;
  int feature_dim = 1;
  int hidden = 128;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
};

// Head parameters. Declaration order is also checkpoint order.
struct ModelParameters {
  ModelConfig config;
  Tensor layer_weights;  // [L]
  Tensor fc1_weight;     // [hidden, 2 * feature_dim]
  Tensor fc1_bias;       // [hidden]
  Tensor age_weight;     // [K, hidden]
  Tensor age_bias;       // [K]
  Tensor gender_weight;  // [2, hidden]
  Tensor gender_bias;    // [2]

  static constexpr std::size_t kTensorCount = 7;

  // All tensors zero-filled with the shapes implied by config.
  static ModelParameters zeros(const ModelConfig& config);
  // Fan-in uniform initialization; fusion weights start at 1/L.
  static ModelParameters initialize(const ModelConfig& config, std::uint64_t seed);

  std::array<Tensor*, kTensorCount> tensors();
  std::array<const Tensor*, kTensorCount> tensors() const;
  static const std::array<const char*, kTensorCount>& tensor_names();

  std::size_t parameter_count() const;
  bool all_finite() const;
};

// x[t, c] = sum_l w_l * phi_l[t, c]; returns frames * dims values.
std::vector<double> layer_weighted_sum(const FeatureSequence& features,
                                       std::span<const double> layer_weights,
                                       Backend backend = Backend::parallel);

// Per-dimension mean followed by per-dimension population standard
// deviation (variance floored at 1e-12).
std::vector<double> stats_pooling(std::span<const double> frames,
                                  std::size_t frame_count, std::size_t dims);

// Activations kept for the backward pass.
struct ForwardResult {
  LabelDistribution age_dist = LabelDistribution::uniform(2);
  double predicted_age = 0.0;
  double predicted_std = 0.0;
  std::array<double, 2> gender_probs{0.5, 0.5};
  std::vector<double> embedding;  // z, after the rectifier

  std::vector<double> fused;
  std::vector<double> pooled;
  std::vector<double> pre_activation;
};

// fusion -> pooling -> FC1 + ReLU (z) -> FC2 -> softmax over K, and
// z -> gender FC -> softmax over 2. Throws NumericError naming the first
// layer that produced a non-finite value.
ForwardResult forward(const FeatureSequence& features,
                      const ModelParameters& params,
                      Backend backend = Backend::parallel);

// Accumulates parameter gradients into grads, given the loss gradient with
// respect to the age logits and the gender logits.
void backward(const FeatureSequence& features, const ModelParameters& params,
              const ForwardResult& fwd, std::span<const double> age_logit_grad,
              std::span<const double, 2> gender_logit_grad,
              ModelParameters& grads);

struct Prediction {
  double age = 0.0;
  double uncertainty = 0.0;  // standard deviation of the predicted distribution
};

// Whole-sequence inference; the gender branch is not used.
Prediction predict(const FeatureSequence& features, const ModelParameters& params);

struct OptimizerState {
  double learning_rate = 2e-3;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  ModelParameters velocity;

  OptimizerState(const ModelConfig& config, double learning_rate,
                 double momentum, double weight_decay);
};

// v <- m v + g + wd theta;  theta <- theta - lr v.
// Throws NumericError (without touching params) if any gradient is not finite.
void sgd_update(ModelParameters& params, const ModelParameters& grads,
                OptimizerState& state);

}  // namespace svldl
