#include "svldl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "svldl/error.hpp"
#include "svldl/kernels.hpp"

namespace svldl {

namespace {

constexpr double kVarianceFloor = 1e-12;

void require_finite(std::span<const double> values, const char* layer) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite activation in ") + layer);
    }
  }
}

// out = W x + b, W row-major [rows, cols].
void affine(const Tensor& weight, const Tensor& bias, std::span<const double> x,
            std::vector<double>& out) {
  const std::size_t rows = weight.shape[0];
  const std::size_t cols = weight.shape[1];
  out.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* w = weight.data.data() + r * cols;
    double acc = bias.data[r];
    for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
    out[r] = acc;
  }
}

// grad_w += g x^T, grad_b += g, grad_x += W^T g.
void affine_backward(const Tensor& weight, std::span<const double> x,
                     std::span<const double> g, Tensor& grad_w, Tensor& grad_b,
                     std::vector<double>* grad_x) {
  const std::size_t rows = weight.shape[0];
  const std::size_t cols = weight.shape[1];
  if (grad_x) grad_x->assign(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    grad_b.data[r] += gr;
    double* gw = grad_w.data.data() + r * cols;
    const double* w = weight.data.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      gw[c] += gr * x[c];
      if (grad_x) (*grad_x)[c] += w[c] * gr;
    }
  }
}

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data) v = dist(rng);
}

}  // namespace

FeatureSequence::FeatureSequence(std::size_t layers, std::size_t frames,
                                 std::size_t dims)
    : layers(layers), frames(frames), dims(dims),
      values(layers * frames * dims, 0.0f) {}

void FeatureSequence::validate() const {
  if (layers == 0 || frames == 0 || dims == 0) {
    throw DomainError("feature sequence needs L, T and C_f >= 1");
  }
  if (values.size() != layers * frames * dims) {
    throw DomainError("feature sequence size does not match its shape");
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw DomainError("non-finite feature value");
  }
}

FeatureSequence crop_frames(const FeatureSequence& features, std::size_t start,
                            std::size_t count) {
  if (count == 0 || start + count > features.frames) {
    throw DomainError("crop window outside the feature sequence");
  }
  FeatureSequence out(features.layers, count, features.dims);
  for (std::size_t l = 0; l < features.layers; ++l) {
    const auto src = features.values.begin() +
                     static_cast<std::ptrdiff_t>((l * features.frames + start) * features.dims);
    std::copy(src, src + static_cast<std::ptrdiff_t>(count * features.dims),
              out.values.begin() + static_cast<std::ptrdiff_t>(l * count * features.dims));
  }
  return out;
}

void ModelConfig::validate() const {
  if (K < 2 || layers < 1 || feature_dim < 1 || hidden < 1) {
    throw DomainError("model config needs K >= 2 and L, C_f, hidden >= 1");
  }
}

Tensor::Tensor(std::vector<std::size_t> shape_in) : shape(std::move(shape_in)) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        std::multiplies<>());
  data.assign(n, 0.0);
}

ModelParameters ModelParameters::zeros(const ModelConfig& config) {
  config.validate();
  const auto K = static_cast<std::size_t>(config.K);
  const auto L = static_cast<std::size_t>(config.layers);
  const auto C = static_cast<std::size_t>(config.feature_dim);
  const auto H = static_cast<std::size_t>(config.hidden);
  ModelParameters p;
  p.config = config;
  p.layer_weights = Tensor({L});
  p.fc1_weight = Tensor({H, 2 * C});
  p.fc1_bias = Tensor({H});
  p.age_weight = Tensor({K, H});
  p.age_bias = Tensor({K});
  p.gender_weight = Tensor({2, H});
  p.gender_bias = Tensor({2});
  return p;
}

ModelParameters ModelParameters::initialize(const ModelConfig& config,
                                            std::uint64_t seed) {
  auto p = zeros(config);
  std::mt19937_64 rng(seed);
  std::fill(p.layer_weights.data.begin(), p.layer_weights.data.end(),
            1.0 / config.layers);
  const double fc1_bound = 1.0 / std::sqrt(2.0 * config.feature_dim);
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  fill_uniform(p.fc1_weight, fc1_bound, rng);
  fill_uniform(p.fc1_bias, fc1_bound, rng);
  fill_uniform(p.age_weight, head_bound, rng);
  fill_uniform(p.age_bias, head_bound, rng);
  fill_uniform(p.gender_weight, head_bound, rng);
  fill_uniform(p.gender_bias, head_bound, rng);
  return p;
}

std::array<Tensor*, ModelParameters::kTensorCount> ModelParameters::tensors() {
  return {&layer_weights, &fc1_weight, &fc1_bias, &age_weight,
          &age_bias,      &gender_weight, &gender_bias};
}

std::array<const Tensor*, ModelParameters::kTensorCount> ModelParameters::tensors() const {
  return {&layer_weights, &fc1_weight, &fc1_bias, &age_weight,
          &age_bias,      &gender_weight, &gender_bias};
}

const std::array<const char*, ModelParameters::kTensorCount>&
ModelParameters::tensor_names() {
  static const std::array<const char*, kTensorCount> names = {
      "layer_weights", "fc1_weight", "fc1_bias",   "age_weight",
      "age_bias",      "gender_weight", "gender_bias"};
  return names;
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->data.size();
  return n;
}

bool ModelParameters::all_finite() const {
  for (const Tensor* t : tensors()) {
    for (double v : t->data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::vector<double> layer_weighted_sum(const FeatureSequence& features,
                                       std::span<const double> layer_weights,
                                       Backend backend) {
  if (layer_weights.size() != features.layers) {
    throw DomainError("layer weight count " + std::to_string(layer_weights.size()) +
                      " does not match L = " + std::to_string(features.layers));
  }
  std::vector<double> out(features.frames * features.dims);
  kernels::fuse_layers(features.values, features.layers, features.frames,
                       features.dims, layer_weights, out, backend);
  return out;
}

std::vector<double> stats_pooling(std::span<const double> frames,
                                  std::size_t frame_count, std::size_t dims) {
  if (frame_count == 0) throw DomainError("stats pooling needs T >= 1");
  std::vector<double> out(2 * dims, 0.0);
  const double inv_t = 1.0 / static_cast<double>(frame_count);
  for (std::size_t t = 0; t < frame_count; ++t) {
    for (std::size_t c = 0; c < dims; ++c) out[c] += frames[t * dims + c];
  }
  for (std::size_t c = 0; c < dims; ++c) out[c] *= inv_t;
  for (std::size_t t = 0; t < frame_count; ++t) {
    for (std::size_t c = 0; c < dims; ++c) {
      const double d = frames[t * dims + c] - out[c];
      out[dims + c] += d * d;
    }
  }
  for (std::size_t c = 0; c < dims; ++c) {
    out[dims + c] = std::sqrt(std::max(out[dims + c] * inv_t, kVarianceFloor));
  }
  return out;
}

ForwardResult forward(const FeatureSequence& features,
                      const ModelParameters& params, Backend backend) {
  const auto& cfg = params.config;
  if (features.layers != static_cast<std::size_t>(cfg.layers) ||
      features.dims != static_cast<std::size_t>(cfg.feature_dim)) {
    throw DomainError("feature shape (L=" + std::to_string(features.layers) +
                      ", C_f=" + std::to_string(features.dims) +
                      ") does not match the model config");
  }
  if (features.frames == 0) throw DomainError("feature sequence has no frames");

  ForwardResult r;
  r.fused = layer_weighted_sum(features, params.layer_weights.data, backend);
  require_finite(r.fused, "layer fusion");
  r.pooled = stats_pooling(r.fused, features.frames, features.dims);
  require_finite(r.pooled, "statistics pooling");
  affine(params.fc1_weight, params.fc1_bias, r.pooled, r.pre_activation);
  require_finite(r.pre_activation, "fc1");
  r.embedding.resize(r.pre_activation.size());
  for (std::size_t i = 0; i < r.embedding.size(); ++i) {
    r.embedding[i] = std::max(r.pre_activation[i], 0.0);
  }
  std::vector<double> age_logits;
  affine(params.age_weight, params.age_bias, r.embedding, age_logits);
  require_finite(age_logits, "age head");
  std::vector<double> gender_logits;
  affine(params.gender_weight, params.gender_bias, r.embedding, gender_logits);
  require_finite(gender_logits, "gender head");

  r.age_dist = LabelDistribution::from_logits(age_logits);
  r.predicted_age = distribution_mean(r.age_dist);
  r.predicted_std = distribution_std(r.age_dist);
  const auto g = softmax(gender_logits);
  r.gender_probs = {g[0], g[1]};
  return r;
}

void backward(const FeatureSequence& features, const ModelParameters& params,
              const ForwardResult& fwd, std::span<const double> age_logit_grad,
              std::span<const double, 2> gender_logit_grad,
              ModelParameters& grads) {
  const std::size_t T = features.frames;
  const std::size_t C = features.dims;
  const std::size_t L = features.layers;

  std::vector<double> grad_z;
  affine_backward(params.age_weight, fwd.embedding, age_logit_grad,
                  grads.age_weight, grads.age_bias, &grad_z);
  std::vector<double> grad_z_gender;
  affine_backward(params.gender_weight, fwd.embedding, gender_logit_grad,
                  grads.gender_weight, grads.gender_bias, &grad_z_gender);
  for (std::size_t i = 0; i < grad_z.size(); ++i) {
    grad_z[i] = fwd.pre_activation[i] > 0.0 ? grad_z[i] + grad_z_gender[i] : 0.0;
  }
  std::vector<double> grad_pooled;
  affine_backward(params.fc1_weight, fwd.pooled, grad_z, grads.fc1_weight,
                  grads.fc1_bias, &grad_pooled);

  // Pooling: d mean_c / d x_tc = 1/T; d std_c / d x_tc = (x_tc - mean_c) / (T std_c)
  // unless the variance floor is active.
  const double inv_t = 1.0 / static_cast<double>(T);
  std::vector<double> std_scale(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const double sd = fwd.pooled[C + c];
    if (sd * sd > kVarianceFloor) std_scale[c] = grad_pooled[C + c] * inv_t / sd;
  }
  std::vector<double> grad_fused(T * C);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      grad_fused[t * C + c] = grad_pooled[c] * inv_t +
                              std_scale[c] * (fwd.fused[t * C + c] - fwd.pooled[c]);
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    double acc = 0.0;
    for (std::size_t j = 0; j < T * C; ++j) {
      acc += grad_fused[j] * static_cast<double>(features.values[l * T * C + j]);
    }
    grads.layer_weights.data[l] += acc;
  }
}

Prediction predict(const FeatureSequence& features, const ModelParameters& params) {
  const auto r = forward(features, params, Backend::serial);
  return {r.predicted_age, r.predicted_std};
}

OptimizerState::OptimizerState(const ModelConfig& config, double learning_rate_in,
                               double momentum_in, double weight_decay_in)
    : learning_rate(learning_rate_in),
      momentum(momentum_in),
      weight_decay(weight_decay_in),
      velocity(ModelParameters::zeros(config)) {
  if (!(learning_rate >= 0.0) || !(momentum >= 0.0 && momentum < 1.0) ||
      !(weight_decay >= 0.0)) {
    throw DomainError("optimizer needs lr >= 0, momentum in [0, 1), weight decay >= 0");
  }
}

void sgd_update(ModelParameters& params, const ModelParameters& grads,
                OptimizerState& state) {
  if (!grads.all_finite()) {
    throw NumericError("non-finite gradient; update not applied");
  }
  auto p = params.tensors();
  auto g = grads.tensors();
  auto v = state.velocity.tensors();
  for (std::size_t i = 0; i < ModelParameters::kTensorCount; ++i) {
    if (p[i]->data.size() != g[i]->data.size() ||
        p[i]->data.size() != v[i]->data.size()) {
      throw DomainError("gradient or velocity shape does not match parameters");
    }
    auto& theta = p[i]->data;
    auto& vel = v[i]->data;
    const auto& grad = g[i]->data;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      vel[j] = state.momentum * vel[j] + grad[j] + state.weight_decay * theta[j];
      theta[j] -= state.learning_rate * vel[j];
    }
  }
}

}  // namespace svldl
