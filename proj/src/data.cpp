#include "svldl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "svldl/binary_io.hpp"
#include "svldl/error.hpp"

namespace svldl {

namespace {

constexpr char kSvfMagic[] = "SVF1";
constexpr std::uint64_t kEmbeddingSeed = 0x5f3759dfULL;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::vector<std::uint8_t> encode_features(const FeatureSequence& features) {
  features.validate();
  std::vector<std::uint8_t> out(kSvfMagic, kSvfMagic + 4);
  out.reserve(16 + 4 * features.values.size());
  binary::put_u32(out, static_cast<std::uint32_t>(features.layers));
  binary::put_u32(out, static_cast<std::uint32_t>(features.frames));
  binary::put_u32(out, static_cast<std::uint32_t>(features.dims));
  for (float v : features.values) binary::put_f32(out, v);
  return out;
}

FeatureSequence decode_features(std::span<const std::uint8_t> bytes) {
  binary::Reader in(bytes, "SVF");
  if (!in.magic(kSvfMagic, 4)) throw FormatError("SVF: bad magic");
  const std::size_t layers = in.u32();
  const std::size_t frames = in.u32();
  const std::size_t dims = in.u32();
  if (layers == 0 || frames == 0 || dims == 0) {
    throw FormatError("SVF: zero-sized dimension");
  }
  const std::size_t count = layers * frames * dims;
  if (count / layers / frames != dims || in.remaining() / 4 < count) {
    throw FormatError("SVF: truncated payload");
  }
  if (in.remaining() != count * 4) throw FormatError("SVF: trailing bytes");
  FeatureSequence out(layers, frames, dims);
  for (float& v : out.values) {
    v = in.f32();
    if (!std::isfinite(v)) throw FormatError("SVF: non-finite value");
  }
  return out;
}

void write_features(const std::filesystem::path& path,
                    const FeatureSequence& features) {
  binary::write_file(path, encode_features(features));
}

FeatureSequence load_features(const std::filesystem::path& path) {
  return decode_features(binary::read_file(path));
}

Manifest load_manifest(const std::filesystem::path& path, int K) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  Manifest manifest;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      if (line != kManifestHeader) {
        throw ParseError(std::string("expected header '") + kManifestHeader + "'",
                         line_no);
      }
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 4) {
      throw ParseError("expected 4 comma-separated fields", line_no);
    }
    ManifestRow row;
    row.id = fields[0];
    if (row.id.empty()) throw ParseError("empty id", line_no);
    if (!ids.insert(row.id).second) {
      throw ParseError("duplicate id '" + row.id + "'", line_no);
    }
    if (fields[1].empty()) throw ParseError("empty feature path", line_no);
    row.feature_path = fields[1];
    if (row.feature_path.is_relative()) row.feature_path = base / row.feature_path;
    if (!parse_double(fields[2], row.age) || !std::isfinite(row.age)) {
      throw ParseError("malformed age '" + fields[2] + "'", line_no);
    }
    if (row.age < 1.0 || row.age > K) {
      throw ParseError("age " + fields[2] + " outside [1, " + std::to_string(K) + "]",
                       line_no);
    }
    if (fields[3] == "0") {
      row.gender = 0;
    } else if (fields[3] == "1") {
      row.gender = 1;
    } else {
      throw ParseError("gender must be 0 or 1, got '" + fields[3] + "'", line_no);
    }
    if (!std::filesystem::exists(row.feature_path)) {
      throw ParseError("feature file not found: " + row.feature_path.string(),
                       line_no);
    }
    manifest.rows.push_back(std::move(row));
  }
  if (!saw_header) throw ParseError("missing header", 1);
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  const auto base = path.parent_path();
  out << kManifestHeader << '\n';
  for (const auto& row : manifest.rows) {
    auto feature_path = row.feature_path;
    if (!base.empty() && feature_path.parent_path() == base) {
      feature_path = feature_path.filename();
    }
    std::ostringstream age;
    age.precision(17);
    age << row.age;
    out << row.id << ',' << feature_path.string() << ',' << age.str() << ','
        << row.gender << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<Sample> load_samples(const Manifest& manifest) {
  std::vector<Sample> samples;
  samples.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) {
    samples.push_back({row.id, load_features(row.feature_path), row.age, row.gender});
  }
  return samples;
}

std::vector<Sample> synth_generate(const SynthSpec& spec) {
  if (spec.layers == 0 || spec.frames == 0 || spec.dims == 0 || spec.K < 2) {
    throw DomainError("synthetic spec needs positive sizes");
  }
  if (spec.K < kSynthMaxAge) {
    throw DomainError("synthetic ages reach 70, so K must be at least 70");
  }
  if (!(spec.noise_level >= 0.0)) throw DomainError("noise level must be >= 0");

  // Embedding rows: age slope, gender offset, constant offset per (layer, dim).
  const std::size_t rows = spec.layers * spec.dims;
  std::vector<double> age_slope(rows), gender_offset(rows), offset(rows);
  {
    std::mt19937_64 rng(kEmbeddingSeed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < rows; ++i) {
      age_slope[i] = normal(rng);
      gender_offset[i] = 0.5 * normal(rng);
      offset[i] = 0.5 * normal(rng);
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> age_dist(kSynthMinAge, kSynthMaxAge);
  std::bernoulli_distribution gender_dist(0.5);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double age_center = 0.5 * (kSynthMinAge + kSynthMaxAge);
  const double age_scale = 0.5 * (kSynthMaxAge - kSynthMinAge);

  std::vector<Sample> samples;
  samples.reserve(spec.n_samples);
  for (std::size_t n = 0; n < spec.n_samples; ++n) {
    Sample s;
    char id[32];
    std::snprintf(id, sizeof(id), "syn%06zu", n);
    s.id = id;
    s.age = age_dist(rng);
    s.gender = gender_dist(rng) ? 1 : 0;
    s.features = FeatureSequence(spec.layers, spec.frames, spec.dims);
    const double a = (s.age - age_center) / age_scale;
    const double g = s.gender == 1 ? 1.0 : -1.0;
    for (std::size_t l = 0; l < spec.layers; ++l) {
      for (std::size_t t = 0; t < spec.frames; ++t) {
        for (std::size_t c = 0; c < spec.dims; ++c) {
          const std::size_t r = l * spec.dims + c;
          double v = age_slope[r] * a + gender_offset[r] * g + offset[r];
          if (spec.noise_level > 0.0) v += spec.noise_level * noise(rng);
          s.features.at(l, t, c) = static_cast<float>(v);
        }
      }
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split(
    std::vector<Sample> samples, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw DomainError("split fraction must lie in (0, 1)");
  }
  if (samples.size() < 2) throw DomainError("split needs at least two samples");
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto first_count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(samples.size())));
  first_count = std::clamp<std::size_t>(first_count, 1, samples.size() - 1);

  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  out.first.reserve(first_count);
  out.second.reserve(samples.size() - first_count);
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dest = i < first_count ? out.first : out.second;
    dest.push_back(std::move(samples[order[i]]));
  }
  return out;
}

}  // namespace svldl
