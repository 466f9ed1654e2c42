#include "svldl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "svldl/error.hpp"

namespace svldl {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_bool(std::string_view s, bool& out) {
  if (s == "true" || s == "1") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0") {
    out = false;
    return true;
  }
  return false;
}

using Setter = std::function<bool(RunConfig&, std::string_view)>;

template <typename T, typename Get>
Setter number(Get get) {
  return [get](RunConfig& c, std::string_view v) { return parse_number<T>(v, get(c)); };
}

template <typename Get>
Setter flag(Get get) {
  return [get](RunConfig& c, std::string_view v) { return parse_bool(v, get(c)); };
}

template <typename Get>
Setter text(Get get) {
  return [get](RunConfig& c, std::string_view v) {
    get(c) = std::string(v);
    return true;
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"K", number<int>([](RunConfig& c) -> int& { return c.K; })},
      {"cand_start", number<double>([](RunConfig& c) -> double& { return c.candidates.start; })},
      {"cand_stop", number<double>([](RunConfig& c) -> double& { return c.candidates.stop; })},
      {"cand_step", number<double>([](RunConfig& c) -> double& { return c.candidates.step; })},
      {"cand_squared", flag([](RunConfig& c) -> bool& { return c.candidates.squared; })},
      {"lambda1", number<double>([](RunConfig& c) -> double& { return c.weights.ccc; })},
      {"lambda2", number<double>([](RunConfig& c) -> double& { return c.weights.kl; })},
      {"lambda3", number<double>([](RunConfig& c) -> double& { return c.weights.variance; })},
      {"lambda4", number<double>([](RunConfig& c) -> double& { return c.weights.diff; })},
      {"lambda5", number<double>([](RunConfig& c) -> double& { return c.weights.gender; })},
      {"gamma", number<double>([](RunConfig& c) -> double& { return c.weights.gamma; })},
      {"hidden", number<int>([](RunConfig& c) -> int& { return c.hidden; })},
      {"lr", number<double>([](RunConfig& c) -> double& { return c.learning_rate; })},
      {"momentum", number<double>([](RunConfig& c) -> double& { return c.momentum; })},
      {"weight_decay", number<double>([](RunConfig& c) -> double& { return c.weight_decay; })},
      {"batch_size", number<int>([](RunConfig& c) -> int& { return c.batch_size; })},
      {"epochs", number<int>([](RunConfig& c) -> int& { return c.epochs; })},
      {"crop_frames", number<int>([](RunConfig& c) -> int& { return c.crop_frames; })},
      {"seed", number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.seed; })},
      {"finetune_epochs", number<int>([](RunConfig& c) -> int& { return c.finetune_epochs; })},
      {"finetune_lr", number<double>([](RunConfig& c) -> double& { return c.finetune_learning_rate; })},
      {"finetune_weight_decay",
       number<double>([](RunConfig& c) -> double& { return c.finetune_weight_decay; })},
      {"finetune_batch_size",
       number<int>([](RunConfig& c) -> int& { return c.finetune_batch_size; })},
      {"finetune_cand_start",
       number<double>([](RunConfig& c) -> double& { return c.finetune_candidates.start; })},
      {"finetune_cand_stop",
       number<double>([](RunConfig& c) -> double& { return c.finetune_candidates.stop; })},
      {"finetune_cand_step",
       number<double>([](RunConfig& c) -> double& { return c.finetune_candidates.step; })},
      {"finetune_cand_squared",
       flag([](RunConfig& c) -> bool& { return c.finetune_candidates.squared; })},
      {"finetune_crop_frames",
       number<int>([](RunConfig& c) -> int& { return c.finetune_crop_frames; })},
      {"q", number<double>([](RunConfig& c) -> double& { return c.q; })},
      {"manifest", text([](RunConfig& c) -> std::string& { return c.manifest; })},
      {"checkpoint", text([](RunConfig& c) -> std::string& { return c.checkpoint; })},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  if (K < 2) throw DomainError("K must be >= 2");
  weights.validate();
  candidates.build();
  if (finetune_epochs > 0) finetune_candidates.build();
  if (hidden < 1) throw DomainError("hidden must be >= 1");
  if (!(learning_rate >= 0.0) || !(finetune_learning_rate >= 0.0)) {
    throw DomainError("learning rates must be >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0) || !(finetune_weight_decay >= 0.0)) {
    throw DomainError("weight decay must be >= 0");
  }
  if (batch_size < 1 || finetune_batch_size < 1) throw DomainError("batch size must be >= 1");
  if (weights.ccc > 0.0 && (batch_size < 2 || (finetune_epochs > 0 && finetune_batch_size < 2))) {
    throw DomainError("lambda1 > 0 needs a batch size of at least 2");
  }
  if (epochs < 0 || finetune_epochs < 0) throw DomainError("epochs must be >= 0");
  if (crop_frames < 0 || finetune_crop_frames < 0) throw DomainError("crop frames must be >= 0");
  if (!(q > 0.0)) throw DomainError("q must be > 0");
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ParseError("unknown key '" + std::string(key) + "'", line_no);
    }
    if (!seen.insert(std::string(key)).second) {
      throw ParseError("repeated key '" + std::string(key) + "'", line_no);
    }
    if (value.empty() || !it->second(base, value)) {
      throw ParseError("bad value '" + std::string(value) + "' for " + std::string(key),
                       line_no);
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

void apply_preset(RunConfig& config, std::string_view preset) {
  const CandidateGrid fixed_unit{1.0, 1.0, 1.0, false};
  const CandidateGrid selective{};
  auto set = [&config](double l1, double l2, double l3, double l4, double l5,
                       const CandidateGrid& grid) {
    config.weights.ccc = l1;
    config.weights.kl = l2;
    config.weights.variance = l3;
    config.weights.diff = l4;
    config.weights.gender = l5;
    config.candidates = grid;
  };
  if (preset == "mvkl") {
    set(0.0, 1.0, 0.1, 0.0, 0.0, fixed_unit);
  } else if (preset == "cvkl") {
    set(10.0, 1.0, 0.1, 0.0, 0.0, fixed_unit);
  } else if (preset == "svldl-cvkl") {
    set(10.0, 1.0, 0.1, 0.0, 0.0, selective);
  } else if (preset == "+diff") {
    set(10.0, 1.0, 0.1, 0.1, 0.0, selective);
  } else if (preset == "+gender") {
    set(10.0, 1.0, 0.1, 0.1, 0.01, selective);
  } else {
    throw DomainError("unknown preset '" + std::string(preset) + "'");
  }
}

}  // namespace svldl
