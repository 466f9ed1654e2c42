#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "svldl/checkpoint.hpp"
#include "svldl/config.hpp"
#include "svldl/data.hpp"
#include "svldl/error.hpp"
#include "svldl/gradcheck.hpp"
#include "svldl/training.hpp"

namespace svldl::cli {

namespace {

namespace fs = std::filesystem;

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

struct TrainArgs {
  std::string config;
  std::string manifest;
  std::string out;
  std::string preset;
};

struct EvaluateArgs {
  std::string checkpoint;
  std::string manifest;
  double q = 2.0;
};

struct PredictArgs {
  std::string checkpoint;
  std::string features;
  bool dump_dist = false;
};

struct GradcheckArgs {
  std::uint64_t seed = 2024;
  std::size_t instances = 100;
  std::string corrupt;
};

struct SynthArgs {
  SynthSpec spec;
  std::string out_dir;
};

// Manifest plus features; any failure is a data error.
std::optional<std::vector<Sample>> load_dataset(const std::string& path, int K,
                                                std::ostream& err) {
  try {
    if (!fs::exists(path)) {
      err << "error: manifest not found: " << path << '\n';
      return std::nullopt;
    }
    return load_samples(load_manifest(path, K));
  } catch (const std::exception& e) {
    err << "error: " << path << ": " << e.what() << '\n';
    return std::nullopt;
  }
}

std::optional<ModelParameters> load_model(const std::string& path, std::ostream& err) {
  try {
    return load_checkpoint(path);
  } catch (const std::exception& e) {
    err << "error: checkpoint " << path << ": " << e.what() << '\n';
    return std::nullopt;
  }
}

bool shape_matches(const ModelParameters& params, const FeatureSequence& f) {
  return f.layers == static_cast<std::size_t>(params.config.layers) &&
         f.dims == static_cast<std::size_t>(params.config.feature_dim);
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    if (!args.config.empty()) config = load_config(args.config);
    if (!args.preset.empty()) apply_preset(config, args.preset);
    config.validate();
  } catch (const std::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return kConfigError;
  }
  const std::string manifest = !args.manifest.empty() ? args.manifest : config.manifest;
  const std::string checkpoint = !args.out.empty() ? args.out : config.checkpoint;
  if (manifest.empty() || checkpoint.empty()) {
    err << "error: config: a manifest and an output checkpoint are required\n";
    return kConfigError;
  }
  auto samples = load_dataset(manifest, config.K, err);
  if (!samples) return kDataError;
  if (samples->empty()) {
    err << "error: " << manifest << ": manifest has no samples\n";
    return kDataError;
  }

  ModelParameters params;
  try {
    out << "epoch\ttotal\tccc\tkl\tvar\tdiff\tgender\n";
    params = train_model(*samples, config, [&out](const EpochSummary& s) {
      out << s.epoch << '\t' << fixed(s.report.total, 6);
      for (Component c : kAllComponents) {
        const auto v = s.report.component(c);
        out << '\t' << (v ? fixed(*v, 6) : std::string("-"));
      }
      out << '\n' << std::flush;
    });
  } catch (const NumericError& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  try {
    save_checkpoint(checkpoint, params);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
  if (!(args.q > 0.0)) {
    err << "error: q must be positive\n";
    return kConfigError;
  }
  auto params = load_model(args.checkpoint, err);
  if (!params) return kModelMismatch;
  auto samples = load_dataset(args.manifest, params->config.K, err);
  if (!samples) return kDataError;
  if (samples->size() < 2) {
    err << "error: " << args.manifest << ": evaluation needs at least two samples\n";
    return kDataError;
  }
  for (const auto& s : *samples) {
    if (!shape_matches(*params, s.features)) {
      err << "error: sample '" << s.id << "' does not match the checkpoint's feature shape\n";
      return kModelMismatch;
    }
  }
  try {
    const auto report = evaluate_model(*params, *samples, args.q);
    out << "MAE=" << fixed(report.mae) << " PCC=" << fixed(report.pcc)
        << " eta_q=" << fixed(report.eta_q) << " modes=" << fixed(report.mode_count)
        << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

int cmd_predict(const PredictArgs& args, std::ostream& out, std::ostream& err) {
  auto params = load_model(args.checkpoint, err);
  if (!params) return kModelMismatch;
  FeatureSequence features;
  try {
    features = load_features(args.features);
  } catch (const std::exception& e) {
    err << "error: " << args.features << ": " << e.what() << '\n';
    return kDataError;
  }
  if (!shape_matches(*params, features)) {
    err << "error: feature shape does not match the checkpoint\n";
    return kModelMismatch;
  }
  try {
    const auto r = forward(features, *params, Backend::serial);
    out << "age=" << fixed(r.predicted_age) << " std=" << fixed(r.predicted_std) << '\n';
    if (args.dump_dist) {
      char buf[64];
      for (double p : r.age_dist.probs()) {
        std::snprintf(buf, sizeof(buf), "%.17g", p);
        out << buf << '\n';
      }
    }
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kNumericError;
  }
  return kOk;
}

int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err) {
  GradcheckOptions options;
  options.seed = args.seed;
  options.instances = args.instances;
  options.corrupt = args.corrupt;
  const auto entries = run_gradcheck(options);
  int code = kOk;
  for (const auto& e : entries) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-14s max_rel_err=%.3e tol=%.0e instances=%zu %s",
                  e.component.c_str(), e.max_rel_error, e.tolerance, e.instances,
                  e.passed() ? "PASS" : "FAIL");
    out << line << '\n';
    if (!e.passed()) {
      err << "gradcheck failed: " << e.component << '\n';
      code = kGradcheckFailed;
    }
  }
  return code;
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  std::vector<Sample> samples;
  try {
    samples = synth_generate(args.spec);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    const fs::path dir(args.out_dir);
    fs::create_directories(dir);
    Manifest manifest;
    for (const auto& s : samples) {
      const auto path = dir / (s.id + ".svf");
      write_features(path, s.features);
      manifest.rows.push_back({s.id, path, s.age, s.gender});
    }
    const auto manifest_path = dir / "manifest.csv";
    write_manifest(manifest_path, manifest);
    out << manifest_path.string() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Selective-variance label distribution learning for age regression"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--config", train.config, "key=value config file");
  train_cmd->add_option("--manifest", train.manifest, "training manifest (CSV)");
  train_cmd->add_option("--out", train.out, "output checkpoint path");
  train_cmd->add_option("--preset", train.preset, "ablation preset")
      ->check(CLI::IsMember({"mvkl", "cvkl", "svldl-cvkl", "+diff", "+gender"}));

  EvaluateArgs evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "Report MAE, PCC and the unimodal coefficient");
  eval_cmd->add_option("--checkpoint", evaluate.checkpoint)->required();
  eval_cmd->add_option("--manifest", evaluate.manifest)->required();
  eval_cmd->add_option("--q", evaluate.q, "window half-width in standard deviations")
      ->capture_default_str();

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Predict age and spread for one SVF file");
  predict_cmd->add_option("--checkpoint", predict.checkpoint)->required();
  predict_cmd->add_option("--features", predict.features)->required();
  predict_cmd->add_flag("--dump-dist", predict.dump_dist, "print the K probabilities");

  GradcheckArgs gradcheck;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  grad_cmd->add_option("--seed", gradcheck.seed)->capture_default_str();
  grad_cmd->add_option("--instances", gradcheck.instances)->capture_default_str();
  grad_cmd->add_option("--corrupt", gradcheck.corrupt)->group("");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic SVF dataset and manifest");
  synth_cmd->add_option("--n", synth.spec.n_samples)->capture_default_str();
  synth_cmd->add_option("--K", synth.spec.K)->capture_default_str();
  synth_cmd->add_option("--layers", synth.spec.layers)->capture_default_str();
  synth_cmd->add_option("--frames", synth.spec.frames)->capture_default_str();
  synth_cmd->add_option("--dims", synth.spec.dims)->capture_default_str();
  synth_cmd->add_option("--noise", synth.spec.noise_level)->capture_default_str();
  synth_cmd->add_option("--seed", synth.spec.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth.out_dir)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  if (*train_cmd) return cmd_train(train, out, err);
  if (*eval_cmd) return cmd_evaluate(evaluate, out, err);
  if (*predict_cmd) return cmd_predict(predict, out, err);
  if (*grad_cmd) return cmd_gradcheck(gradcheck, out, err);
  return cmd_synth(synth, out, err);
}

}  // namespace svldl::cli
