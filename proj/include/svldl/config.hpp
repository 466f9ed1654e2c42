#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "svldl/distributions.hpp"
#include "svldl/losses.hpp"

namespace svldl {

// Candidate grid description; see make_candidate_set.
struct CandidateGrid {
  double start = 0.1;
  double stop = 10.0;
  double step = 0.1;
  bool squared = true;

  VarianceCandidateSet build() const {
    return make_candidate_set(start, stop, step, squared);
  }
};

// Everything a training or evaluation run needs.
struct RunConfig {
  int K = 100;
  CandidateGrid candidates;
  LossWeights weights;  // lambda1..lambda5, gamma
  int hidden = 128;
  double learning_rate = 2e-3;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  int batch_size = 64;
  int epochs = 30;
  int crop_frames = 150;  // 0 disables cropping
  std::uint64_t seed = 1;

  // Optional second phase at a lower learning rate and a finer grid.
  int finetune_epochs = 0;
  double finetune_learning_rate = 1e-5;
  double finetune_weight_decay = 4e-4;
  int finetune_batch_size = 128;
  CandidateGrid finetune_candidates{0.01, 10.0, 0.01, true};
  int finetune_crop_frames = 300;

  double q = 2.0;
  std::string manifest;
  std::string checkpoint;

  // Throws DomainError when a value is out of range.
  void validate() const;
};

// Flat key=value text; '#' starts a comment; blank lines ignored. Unknown
// keys, repeated keys and malformed values throw ParseError.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

// Ablation presets: mvkl, cvkl, svldl-cvkl, +diff, +gender. Throws
// DomainError for an unknown name.
void apply_preset(RunConfig& config, std::string_view preset);

}  // namespace svldl
