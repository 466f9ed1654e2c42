// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "commands.hpp"
#include "oracles.hpp"
#include "svldl/binary_io.hpp"
#include "svldl/checkpoint.hpp"
#include "svldl/config.hpp"
#include "svldl/data.hpp"
#include "svldl/error.hpp"
#include "svldl/gradcheck.hpp"
#include "svldl/losses.hpp"
#include "svldl/metrics.hpp"
#include "svldl/training.hpp"

using namespace svldl;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double kLossTolerance = 1e-5;
constexpr double kModelTolerance = 1e-4;
constexpr std::size_t kGradInstances = 100;
constexpr double kGradcheckSeconds = 60.0;
constexpr int kSignConstructions = 1000;
constexpr double kSelectionLossTolerance = 1e-10;
constexpr double kMaxModeCount = 1.1;
constexpr double kMaeSlackYears = 0.1;
constexpr double kTrainingSeconds = 600.0;
constexpr double kMinPcc = 0.95;
constexpr double kOracleTolerance = 1e-12;
constexpr int kOracleInstances = 1000;
constexpr double kMaxTestMae = 1.5;
constexpr double kLeastSquaresMae = 0.5;
constexpr int kRoundTripShapes = 100;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void run_criterion(int id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = seconds_since(t0);
  if (!o.pass) ++failures;
  std::printf("criterion %d %s: %s | %s (%.1fs)\n", id, o.pass ? "PASS" : "FAIL", title,
              o.detail.c_str(), secs);
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// Shared synthetic tasks.

// Ablation task for the unimodality and CCC comparisons: 2000 train / 500 test.
constexpr SynthSpec kAblationTask{2500, 100, 2, 20, 16, 0.05, 404};
constexpr double kAblationTrainFraction = 0.8;
constexpr std::uint64_t kAblationSplitSeed = 405;

// Noisier task for the absolute correlation floor.
constexpr SynthSpec kCorrelationTask{2500, 100, 2, 20, 16, 0.1, 505};
constexpr std::uint64_t kCorrelationSplitSeed = 506;

// End-to-end recovery task: 2000 train / 500 test.
constexpr SynthSpec kRecoveryTask{2500, 100, 2, 20, 16, 0.05, 707};
constexpr double kRecoveryTrainFraction = 0.8;
constexpr std::uint64_t kRecoverySplitSeed = 708;

RunConfig scaled_config() {
  RunConfig c;
  c.hidden = 64;
  c.epochs = 30;
  c.seed = 17;
  return c;
}

// Ablation runs add the two-stage schedule: a short fine-tune phase with the
// default low-rate settings.
RunConfig ablation_config() {
  RunConfig c = scaled_config();
  c.finetune_epochs = 10;
  return c;
}

struct TrainedRun {
  std::vector<std::uint8_t> checkpoint;
  EvalReport report;
};

TrainedRun train_and_evaluate(const std::vector<Sample>& train, const std::vector<Sample>& test,
                              const RunConfig& config) {
  const auto params = train_model(train, config);
  return {encode_checkpoint(params), evaluate_model(params, test, config.q)};
}

bool same_report(const EvalReport& a, const EvalReport& b) {
  return a.mae == b.mae && a.pcc == b.pcc && a.eta_q == b.eta_q && a.mode_count == b.mode_count;
}

struct AblationRuns {
  TrainedRun with_diff;
  TrainedRun without_diff;
  double seconds = 0.0;
};

AblationRuns run_diff_ablation() {
  const auto t0 = Clock::now();
  auto [train, test] = split(synth_generate(kAblationTask), kAblationTrainFraction, kAblationSplitSeed);
  RunConfig with = ablation_config();
  with.weights.diff = 0.1;
  RunConfig without = ablation_config();
  without.weights.diff = 0.0;
  AblationRuns runs;
  runs.with_diff = train_and_evaluate(train, test, with);
  runs.without_diff = train_and_evaluate(train, test, without);
  runs.seconds = seconds_since(t0);
  return runs;
}

TrainedRun run_recovery() {
  auto [train, test] = split(synth_generate(kRecoveryTask), kRecoveryTrainFraction, kRecoverySplitSeed);
  return train_and_evaluate(train, test, scaled_config());
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  GradcheckOptions options;
  options.instances = kGradInstances;
  const auto entries = run_gradcheck(options);
  const double secs = seconds_since(t0);
  Outcome o;
  std::ostringstream detail;
  for (const auto& e : entries) {
    const double tol = e.component == "model" ? kModelTolerance : kLossTolerance;
    const bool ok = e.max_rel_error <= tol && e.instances >= kGradInstances;
    o.pass = o.pass && ok;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s=%.1e%s ", e.component.c_str(), e.max_rel_error, ok ? "" : "!");
    detail << buf;
  }
  if (entries.size() != 7) o.pass = false;
  if (secs > kGradcheckSeconds) o.pass = false;
  detail << "runtime " << fmt("%.1fs", secs);
  o.detail = detail.str();
  return o;
}

Outcome diff_sign_property() {
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> K_dist(20, 100);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  int built = 0;
  while (built < kSignConstructions) {
    const int K = K_dist(rng);
    const double s = 1.0 + 99.0 * u(rng);
    const double mu = 1.0 + (K - 1) * u(rng);
    const auto target = gaussian_label_distribution(mu, s, K);
    const auto td = first_difference(target);
    // Rising side: labels k < mu with a positive target step into k + 1.
    std::vector<int> rising;
    for (int k = 1; k + 1 <= K && k + 1 < mu; ++k) {
      if (td.deltas[static_cast<std::size_t>(k - 1)] > 1e-12) rising.push_back(k);
    }
    if (rising.empty()) continue;
    const int k = rising[static_cast<std::size_t>(u(rng) * static_cast<double>(rising.size())) % rising.size()];
    const auto i = static_cast<std::size_t>(k - 1);
    std::vector<double> p(target.probs().begin(), target.probs().end());
    // Move delta from k + 1 to k with delta in (step / 2, p[k + 1]], so the
    // predicted step turns negative.
    const double step = td.deltas[i];
    const double delta = step / 2.0 + (p[i + 1] - step / 2.0) * (0.05 + 0.95 * u(rng));
    p[i] += delta;
    p[i + 1] -= delta;
    const LabelDistribution pred(p);
    if (!(pred.at_label(k + 1) < pred.at_label(k))) continue;
    ++built;
    const auto r = diff_loss(mu, s, pred);
    if (!(r.grad[i] > 0.0 && r.grad[i + 1] < 0.0)) ++violations;
  }
  return {violations == 0, std::to_string(built) + " constructions, " + std::to_string(violations) + " sign violations"};
}

Outcome variance_selection() {
  const auto cands = make_candidate_set(0.1, 10, 0.1, true);
  const double means[] = {15.2, 22.3, 30.0, 37.7, 44.1, 52.6, 58.9, 63.0, 71.25, 84.6};
  int wrong = 0;
  double worst = 0.0;
  for (double mu : means) {
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const auto sel = svldl_select(mu, cands, gaussian_label_distribution(mu, cands[i], 100));
      if (sel.s_star != cands[i]) ++wrong;
      worst = std::max(worst, sel.loss);
    }
  }
  const bool ok = cands.size() == 100 && wrong == 0 && worst <= kSelectionLossTolerance;
  return {ok, std::to_string(cands.size()) + " candidates x 10 means, " + std::to_string(wrong) +
                  " mismatches, max loss " + fmt("%.2e", worst)};
}

Outcome unimodality_effect(const AblationRuns& runs) {
  const auto& d = runs.with_diff.report;
  const auto& n = runs.without_diff.report;
  const bool ordering = d.mode_count <= n.mode_count;
  const bool ceiling = d.mode_count <= kMaxModeCount;
  const bool mae_ok = d.mae <= n.mae + kMaeSlackYears;
  const bool time_ok = runs.seconds <= kTrainingSeconds;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "modes %.4f (diff) vs %.4f (no diff), MAE %.4f vs %.4f, runtime %.0fs",
                d.mode_count, n.mode_count, d.mae, n.mae, runs.seconds);
  return {ordering && ceiling && mae_ok && time_ok, buf};
}

Outcome ccc_effect() {
  RunConfig cvkl = ablation_config();
  apply_preset(cvkl, "cvkl");
  RunConfig mvkl = ablation_config();
  apply_preset(mvkl, "mvkl");

  auto [train, test] = split(synth_generate(kAblationTask), kAblationTrainFraction, kAblationSplitSeed);
  const auto with_ccc = train_and_evaluate(train, test, cvkl);
  const auto without_ccc = train_and_evaluate(train, test, mvkl);

  auto [noisy_train, noisy_test] =
      split(synth_generate(kCorrelationTask), kAblationTrainFraction, kCorrelationSplitSeed);
  const auto noisy = train_and_evaluate(noisy_train, noisy_test, cvkl);

  const bool ok = with_ccc.report.pcc >= without_ccc.report.pcc && noisy.report.pcc >= kMinPcc;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "PCC %.6f (lambda1=10) vs %.6f (lambda1=0); noise %.2f task PCC %.6f",
                with_ccc.report.pcc, without_ccc.report.pcc, kCorrelationTask.noise_level,
                noisy.report.pcc);
  return {ok, buf};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(2, 50);
  std::uniform_int_distribution<int> K_dist(3, 100);
  double mae_err = 0, pcc_err = 0, eta_err = 0;
  for (int trial = 0; trial < kOracleInstances; ++trial) {
    const int n = len(rng);
    std::vector<double> t(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      t[static_cast<std::size_t>(i)] = 1 + 99 * u(rng);
      p[static_cast<std::size_t>(i)] = 1 + 99 * u(rng);
    }
    mae_err = std::max(mae_err, std::abs(mae(t, p) - oracle::mae(t, p)));
    pcc_err = std::max(pcc_err, std::abs(pcc(t, p) - oracle::pearson(t, p)));

    std::vector<LabelDistribution> dists;
    double expected = 0.0;
    const int K = K_dist(rng);
    const double q = 0.25 + 4 * u(rng);
    for (int j = 0; j < 4; ++j) {
      std::vector<double> probs(static_cast<std::size_t>(K));
      double z = 0;
      for (double& v : probs) z += (v = 0.05 + u(rng));
      for (double& v : probs) v /= z;
      dists.emplace_back(probs);
      expected += oracle::valleys(dists.back().probs(), q) / 4.0;
    }
    eta_err = std::max(eta_err, std::abs(unimodal_coefficient(dists, q).eta_q - expected));
  }
  int gaussian_valleys = 0;
  for (int trial = 0; trial < kOracleInstances; ++trial) {
    const int K = K_dist(rng);
    const double mu = 1 + (K - 1) * u(rng);
    const double s = std::exp(std::log(1e-2) + u(rng) * std::log(1e5));
    const std::vector<LabelDistribution> one{gaussian_label_distribution(mu, s, K)};
    gaussian_valleys += static_cast<int>(unimodal_coefficient(one, 0.1 + 10 * u(rng)).eta_q != 0.0);
  }
  const bool ok = mae_err <= kOracleTolerance && pcc_err <= kOracleTolerance &&
                  eta_err <= kOracleTolerance && gaussian_valleys == 0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "max |err| mae %.1e pcc %.1e eta %.1e; gaussians with valleys %d/%d",
                mae_err, pcc_err, eta_err, gaussian_valleys, kOracleInstances);
  return {ok, buf};
}

Outcome synthetic_recovery(const TrainedRun& run, double seconds) {
  auto [train, test] = split(synth_generate(kRecoveryTask), kRecoveryTrainFraction, kRecoverySplitSeed);
  // Least-squares decoder on frame-mean features.
  auto rows = [](const std::vector<Sample>& samples) {
    std::vector<std::vector<double>> out;
    for (const auto& s : samples) {
      const auto& f = s.features;
      std::vector<double> mean(f.layers * f.dims, 0.0);
      for (std::size_t l = 0; l < f.layers; ++l) {
        for (std::size_t t = 0; t < f.frames; ++t) {
          for (std::size_t c = 0; c < f.dims; ++c) mean[l * f.dims + c] += f.at(l, t, c) / static_cast<double>(f.frames);
        }
      }
      out.push_back(std::move(mean));
    }
    return out;
  };
  std::vector<double> train_ages, test_ages;
  for (const auto& s : train) train_ages.push_back(s.age);
  for (const auto& s : test) test_ages.push_back(s.age);
  const double ls_mae = oracle::mae(test_ages, oracle::least_squares_predict(rows(train), train_ages, rows(test)));
  const bool ok = train.size() == 2000 && test.size() == 500 && ls_mae <= kLeastSquaresMae &&
                  run.report.mae <= kMaxTestMae && seconds <= kTrainingSeconds;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "test MAE %.4f (least squares %.4f), PCC %.4f, runtime %.0fs",
                run.report.mae, ls_mae, run.report.pcc, seconds);
  return {ok, buf};
}

Outcome determinism(const AblationRuns& ablation, const TrainedRun& recovery) {
  const auto again = run_diff_ablation();
  const auto recovery_again = run_recovery();
  const bool ok = again.with_diff.checkpoint == ablation.with_diff.checkpoint &&
                  again.without_diff.checkpoint == ablation.without_diff.checkpoint &&
                  recovery_again.checkpoint == recovery.checkpoint &&
                  same_report(again.with_diff.report, ablation.with_diff.report) &&
                  same_report(again.without_diff.report, ablation.without_diff.report) &&
                  same_report(recovery_again.report, recovery.report);
  return {ok, ok ? "3 checkpoints and 3 metric reports bitwise identical on rerun"
                 : "rerun differs"};
}

struct ScratchDir {
  fs::path path = fs::temp_directory_path() / ("svldl_accept_" + std::to_string(::getpid()));
  ScratchDir() { fs::create_directories(path); }
  ~ScratchDir() { fs::remove_all(path); }
};

int cli_code(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  return cli::run(args, out, err);
}

Outcome format_round_trips() {
  ScratchDir dir;
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> small(1, 16);
  std::uniform_int_distribution<std::size_t> frames(1, 300);
  std::uniform_int_distribution<std::size_t> dims(1, 256);
  std::normal_distribution<float> n(0.0f, 3.0f);
  int svf_fail = 0, ckpt_fail = 0;
  for (int i = 0; i < kRoundTripShapes; ++i) {
    FeatureSequence f(small(rng), frames(rng), dims(rng));
    for (float& v : f.values) v = n(rng);
    const auto path = dir.path / "f.svf";
    write_features(path, f);
    const auto back = load_features(path);
    if (back.layers != f.layers || back.frames != f.frames || back.dims != f.dims ||
        encode_features(back) != encode_features(f)) {
      ++svf_fail;
    }

    const ModelConfig cfg{static_cast<int>(2 + small(rng) * 6), static_cast<int>(small(rng)),
                          static_cast<int>(small(rng) * 4), static_cast<int>(small(rng) * 8)};
    const auto params = ModelParameters::initialize(cfg, rng());
    save_checkpoint(dir.path / "m.ckpt", params);
    const auto loaded = load_checkpoint(dir.path / "m.ckpt");
    if (!(loaded.config == cfg) || encode_checkpoint(loaded) != encode_checkpoint(params)) ++ckpt_fail;
  }

  // Malformed inputs: library errors and CLI exit codes.
  int bad = 0;
  FeatureSequence f(1, 2, 2);
  f.values = {1, 2, 3, 4};
  auto bytes = encode_features(f);
  auto expect_format = [&bad](const std::function<void()>& fn) {
    try {
      fn();
      ++bad;
    } catch (const FormatError&) {
    }
  };
  auto magic = bytes;
  magic[0] = 'X';
  expect_format([&] { decode_features(magic); });
  expect_format([&] { decode_features(std::span(bytes).first(bytes.size() - 2)); });
  const auto ckpt = encode_checkpoint(ModelParameters::initialize({10, 1, 2, 4}, 1));
  auto ckpt_magic = ckpt;
  ckpt_magic[0] = 'Z';
  expect_format([&] { decode_checkpoint(ckpt_magic); });
  expect_format([&] { decode_checkpoint(std::span(ckpt).first(ckpt.size() - 8)); });

  binary::write_file(dir.path / "bad.svf", magic);
  binary::write_file(dir.path / "bad.ckpt", ckpt_magic);
  if (cli_code({"synth", "--n", "3", "--out", (dir.path / "data").string()}) != 0) ++bad;
  const auto manifest = (dir.path / "data" / "manifest.csv").string();
  if (cli_code({"evaluate", "--checkpoint", (dir.path / "bad.ckpt").string(), "--manifest", manifest}) != cli::kModelMismatch) ++bad;
  save_checkpoint(dir.path / "good.ckpt", ModelParameters::initialize({100, 2, 16, 8}, 1));
  if (cli_code({"predict", "--checkpoint", (dir.path / "good.ckpt").string(), "--features", (dir.path / "bad.svf").string()}) != cli::kDataError) ++bad;
  if (cli_code({"predict", "--checkpoint", (dir.path / "good.ckpt").string(), "--features", (dir.path / "data" / "syn000000.svf").string()}) != cli::kOk) ++bad;

  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d shapes: SVF mismatches %d, checkpoint mismatches %d; malformed-input checks failed %d",
                kRoundTripShapes, svf_fail, ckpt_fail, bad);
  return {svf_fail == 0 && ckpt_fail == 0 && bad == 0, buf};
}

}  // namespace

int main() {
  run_criterion(1, "gradient suite", gradient_suite);
  run_criterion(2, "diff gradient sign property", diff_sign_property);
  run_criterion(3, "variance selection recovers grid members", variance_selection);

  AblationRuns ablation;
  bool ablation_ok = true;
  try {
    ablation = run_diff_ablation();
  } catch (const std::exception& e) {
    ablation_ok = false;
    std::printf("ablation training failed: %s\n", e.what());
  }
  run_criterion(4, "unimodality effect of the diff term", [&] {
    return ablation_ok ? unimodality_effect(ablation) : Outcome{false, "training failed"};
  });
  run_criterion(5, "ccc effect on correlation", ccc_effect);
  run_criterion(6, "metric oracles", metric_oracles);

  TrainedRun recovery;
  double recovery_secs = 0.0;
  bool recovery_ok = true;
  try {
    const auto t0 = Clock::now();
    recovery = run_recovery();
    recovery_secs = seconds_since(t0);
  } catch (const std::exception& e) {
    recovery_ok = false;
    std::printf("recovery training failed: %s\n", e.what());
  }
  run_criterion(7, "end-to-end synthetic recovery", [&] {
    return recovery_ok ? synthetic_recovery(recovery, recovery_secs) : Outcome{false, "training failed"};
  });
  run_criterion(8, "determinism", [&] {
    return ablation_ok && recovery_ok ? determinism(ablation, recovery) : Outcome{false, "training failed"};
  });
  run_criterion(9, "format round-trips", format_round_trips);

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
