#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svldl/model.hpp"

namespace svldl {

struct Sample {
  std::string id;
  FeatureSequence features;
  double age = 0.0;  // years, within [1, K]
  int gender = 0;    // 0 = female, 1 = male
};

// SVF feature files, little-endian:
//   "SVF1" | u32 L | u32 T | u32 C_f | L*T*C_f float32 (layer, frame, dim)
std::vector<std::uint8_t> encode_features(const FeatureSequence& features);
// Throws FormatError on bad magic, a truncated or oversized payload, or
// non-finite values.
FeatureSequence decode_features(std::span<const std::uint8_t> bytes);

void write_features(const std::filesystem::path& path,
                    const FeatureSequence& features);
FeatureSequence load_features(const std::filesystem::path& path);

struct ManifestRow {
  std::string id;
  std::filesystem::path feature_path;  // resolved against the manifest directory
  double age = 0.0;
  int gender = 0;
};

struct Manifest {
  std::vector<ManifestRow> rows;
};

inline constexpr const char* kManifestHeader = "id,feature_path,age,gender";

// CSV with the header above. Throws ParseError (with the 1-based line) on a
// malformed row, duplicate id, age outside [1, K], gender not in {0, 1}, or a
// feature file that does not exist. Throws std::runtime_error if the
// manifest itself cannot be opened.
Manifest load_manifest(const std::filesystem::path& path, int K = 100);
// Feature paths are written relative to the manifest's directory when possible.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Loads every row's features.
std::vector<Sample> load_samples(const Manifest& manifest);

struct SynthSpec {
  std::size_t n_samples = 100;
  int K = 100;
  std::size_t layers = 2;
  std::size_t frames = 20;
  std::size_t dims = 16;
  double noise_level = 0.05;
  std::uint64_t seed = 1;
};

inline constexpr double kSynthMinAge = 18.0;
inline constexpr double kSynthMaxAge = 70.0;

// Ages uniform on [18, 70], gender uniform on {0, 1}. Every frame of every
// layer is a fixed linear embedding of (age, gender) plus Gaussian noise with
// standard deviation noise_level. The embedding depends only on the shape,
// not on the seed, so datasets drawn with different seeds share it.
std::vector<Sample> synth_generate(const SynthSpec& spec);

// Deterministic shuffle by seed; the first round(fraction * n) samples go to
// the first split.
std::pair<std::vector<Sample>, std::vector<Sample>> split(
    std::vector<Sample> samples, double fraction, std::uint64_t seed);

}  // namespace svldl
