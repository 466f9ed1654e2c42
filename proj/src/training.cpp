#include "svldl/training.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "svldl/error.hpp"
#include "svldl/kernels.hpp"

namespace svldl {

namespace {

// Adds src into dst tensor by tensor.
void accumulate(ModelParameters& dst, const ModelParameters& src) {
  auto d = dst.tensors();
  auto s = src.tensors();
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto& a = d[i]->data;
    const auto& b = s[i]->data;
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
  }
}

struct PhaseSettings {
  double learning_rate;
  double weight_decay;
  int batch_size;
  int crop_frames;
  int epochs;
  bool finetune;
  VarianceCandidateSet candidates;
};

// Splits [0, n) into consecutive batches; a trailing batch too small for the
// CCC term is merged into the previous one.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                              std::size_t batch_size,
                                                              std::size_t min_size) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t start = 0; start < n; start += batch_size) {
    ranges.emplace_back(start, std::min(start + batch_size, n));
  }
  if (ranges.size() > 1) {
    auto& last = ranges.back();
    if (last.second - last.first < min_size) {
      ranges[ranges.size() - 2].second = last.second;
      ranges.pop_back();
    }
  }
  return ranges;
}

}  // namespace

BatchGradient batch_gradient(std::span<const Sample> batch,
                             const ModelParameters& params,
                             const VarianceCandidateSet& candidates,
                             const LossWeights& weights,
                             const HybridOptions& options) {
  const std::size_t n = batch.size();
  if (n == 0) throw DomainError("empty training batch");
  std::vector<ForwardResult> outputs(n);
  kernels::for_each_index(n, options.backend, [&](std::size_t i) {
    outputs[i] = forward(batch[i].features, params, Backend::serial);
  });

  std::vector<LossInput> inputs;
  inputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    inputs.push_back({batch[i].age, batch[i].gender, outputs[i].age_dist,
                      outputs[i].gender_probs});
  }
  BatchGradient out{hybrid_loss(inputs, candidates, weights, options),
                    ModelParameters::zeros(params.config)};

  std::vector<ModelParameters> per_sample(n);
  kernels::for_each_index(n, options.backend, [&](std::size_t i) {
    per_sample[i] = ModelParameters::zeros(params.config);
    backward(batch[i].features, params, outputs[i], out.loss.age_logit_grads[i],
             out.loss.gender_logit_grads[i], per_sample[i]);
  });
  for (const auto& g : per_sample) accumulate(out.grads, g);
  return out;
}

LossReport train_step(std::span<const Sample> batch, ModelParameters& params,
                      OptimizerState& optimizer,
                      const VarianceCandidateSet& candidates,
                      const LossWeights& weights, Backend backend) {
  HybridOptions options;
  options.backend = backend;
  auto result = batch_gradient(batch, params, candidates, weights, options);
  sgd_update(params, result.grads, optimizer);
  return std::move(result.loss.report);
}

ModelParameters train_model(std::span<const Sample> samples, const RunConfig& config,
                            const EpochCallback& on_epoch, Backend backend) {
  config.validate();
  if (samples.empty()) throw DomainError("no training samples");
  ModelConfig model_cfg;
  model_cfg.K = config.K;
  model_cfg.layers = static_cast<int>(samples[0].features.layers);
  model_cfg.feature_dim = static_cast<int>(samples[0].features.dims);
  model_cfg.hidden = config.hidden;
  for (const auto& s : samples) {
    if (s.features.layers != samples[0].features.layers ||
        s.features.dims != samples[0].features.dims) {
      throw DomainError("sample '" + s.id + "' has a different feature shape");
    }
    if (!(s.age >= 1.0 && s.age <= config.K)) {
      throw DomainError("sample '" + s.id + "' has an age outside [1, K]");
    }
  }
  auto params = ModelParameters::initialize(model_cfg, config.seed);

  std::vector<PhaseSettings> phases;
  phases.push_back({config.learning_rate, config.weight_decay, config.batch_size,
                    config.crop_frames, config.epochs, false, config.candidates.build()});
  if (config.finetune_epochs > 0) {
    phases.push_back({config.finetune_learning_rate, config.finetune_weight_decay,
                      config.finetune_batch_size, config.finetune_crop_frames,
                      config.finetune_epochs, true, config.finetune_candidates.build()});
  }

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t min_batch = config.weights.ccc > 0.0 ? 2 : 1;
  if (samples.size() < min_batch) {
    throw DomainError("lambda1 > 0 needs at least two training samples");
  }
  int epoch = 0;
  for (const auto& phase : phases) {
    OptimizerState optimizer(model_cfg, phase.learning_rate, config.momentum,
                             phase.weight_decay);
    for (int e = 0; e < phase.epochs; ++e) {
      ++epoch;
      std::shuffle(order.begin(), order.end(), rng);
      EpochSummary summary;
      summary.epoch = epoch;
      summary.finetune = phase.finetune;
      std::size_t seen = 0;
      for (auto [begin, end] : batch_ranges(order.size(),
                                            static_cast<std::size_t>(phase.batch_size),
                                            min_batch)) {
        std::vector<Sample> batch;
        batch.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
          const Sample& s = samples[order[i]];
          const auto frames = s.features.frames;
          const auto crop = static_cast<std::size_t>(phase.crop_frames);
          if (crop > 0 && frames > crop) {
            std::uniform_int_distribution<std::size_t> start(0, frames - crop);
            batch.push_back({s.id, crop_frames(s.features, start(rng), crop), s.age,
                             s.gender});
          } else {
            batch.push_back(s);
          }
        }
        const auto report = train_step(batch, params, optimizer, phase.candidates,
                                       config.weights, backend);
        const double w = static_cast<double>(batch.size());
        summary.report.total += w * report.total;
        for (std::size_t c = 0; c < kComponentCount; ++c) {
          if (report.components[c]) {
            summary.report.components[c] =
                summary.report.components[c].value_or(0.0) + w * *report.components[c];
          }
        }
        seen += batch.size();
      }
      const double inv = 1.0 / static_cast<double>(seen);
      summary.report.total *= inv;
      for (auto& c : summary.report.components) {
        if (c) *c *= inv;
      }
      if (on_epoch) on_epoch(summary);
    }
  }
  return params;
}

PredictionSet predict_all(const ModelParameters& params, std::span<const Sample> samples,
                          Backend backend) {
  const std::size_t n = samples.size();
  std::vector<ForwardResult> outputs(n);
  kernels::for_each_index(n, backend, [&](std::size_t i) {
    outputs[i] = forward(samples[i].features, params, Backend::serial);
  });
  PredictionSet out;
  out.true_ages.reserve(n);
  out.predicted_ages.reserve(n);
  out.distributions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.true_ages.push_back(samples[i].age);
    out.predicted_ages.push_back(outputs[i].predicted_age);
    out.distributions.push_back(std::move(outputs[i].age_dist));
  }
  return out;
}

EvalReport evaluate_model(const ModelParameters& params, std::span<const Sample> samples,
                          double q, Backend backend) {
  const auto preds = predict_all(params, samples, backend);
  EvalReport report;
  report.q = q;
  report.mae = mae(preds.true_ages, preds.predicted_ages);
  report.pcc = pcc(preds.true_ages, preds.predicted_ages);
  const auto uni = unimodal_coefficient(preds.distributions, q, backend);
  report.eta_q = uni.eta_q;
  report.mode_count = uni.mode_count;
  return report;
}

}  // namespace svldl
