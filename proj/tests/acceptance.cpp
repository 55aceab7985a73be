// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfmsa/cli.hpp"
#include "cfmsa/digest.hpp"
#include "cfmsa/eval.hpp"
#include "cfmsa/gradcheck.hpp"
#include "cfmsa/trainer.hpp"

using namespace cfmsa;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit_s;  // <= 0 means no bound
  std::function<Outcome()> body;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Vec random_vec(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

Outcome algebraic_identities() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const CParams c = CParams::from_values(CMode::kNonUniform, 3, random_vec(rng, 12, 2.0));
    const ScoreBundle b =
        assemble(random_vec(rng, 3, 3.0), random_vec(rng, 3, 3.0), random_vec(rng, 3, 3.0), c);
    const Vec tt = tie_text(b), ti = tie_image(b), tj = tie_joint(b);
    const Vec te = total_effect(b), nde = natural_direct_effect_text(b);
    for (std::size_t y = 0; y < 3; ++y) {
      worst = std::max(worst, std::abs(tj[y] - (tt[y] + ti[y])));
      worst = std::max(worst, std::abs((te[y] - nde[y]) - tt[y]));
    }
  }
  return {worst <= 1e-12, fmt("max deviation %.3g (limit 1e-12)", worst)};
}

Outcome monotone_fusion() {
  std::mt19937_64 rng(7);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec a = random_vec(rng, 3, 3.0), b = random_vec(rng, 3, 3.0), c = random_vec(rng, 3, 3.0);
    Vec sum(3);
    for (std::size_t y = 0; y < 3; ++y) sum[y] = a[y] + b[y] + c[y];
    mismatches += argmax(fuse(a, b, c)) != argmax(sum);
  }
  return {mismatches == 0, fmt("%.0f argmax mismatches in 1000 triples", mismatches)};
}

Outcome gradient_suite() {
  GradCheckOptions opts;
  opts.points = 100;
  opts.seed = 1;
  double worst = 0.0;
  bool ok = true;
  std::size_t checks = 0;
  for (const GradCheckResult& r : run_gradient_suite(opts)) {
    worst = std::max(worst, r.max_relative_error);
    ok = ok && r.passed && r.max_relative_error < 1e-5;
    ++checks;
  }
  return {ok, fmt("%.0f loss/group checks at 100 points, max relative error %.3g (limit 1e-5)",
                  static_cast<double>(checks), worst)};
}

Dataset routing_data() {
  SyntheticConfig cfg;
  cfg.n_train = 160;
  cfg.n_val = 1;
  cfg.n_test = 1;
  cfg.seed = 11;
  return gen_synthetic(cfg).train;
}

Outcome gradient_routing() {
  const Dataset d = routing_data();
  TrainConfig cfg;
  cfg.epochs = 10;  // 160 samples, batch 16: 100 optimizer steps
  cfg.lr_c = 1e-2;
  const ModelParams start = init_model({d.header.d_t, d.header.d_i, cfg.hidden_dim, 3},
                                       cfg.c_mode, cfg.seed);

  TrainConfig c_only = cfg;
  c_only.update_main = false;
  const ModelParams a = train_from(start, c_only, d).params;
  const bool branches_same = a.text == start.text && a.image == start.image && a.joint == start.joint;
  const bool c_moved = !std::equal(a.c.values().begin(), a.c.values().end(), start.c.values().begin());

  TrainConfig main_only = cfg;
  main_only.update_c = false;
  const ModelParams b = train_from(start, main_only, d).params;
  const bool c_same = std::equal(b.c.values().begin(), b.c.values().end(), start.c.values().begin());
  const bool branches_moved = !(b.text == start.text);

  std::ostringstream s;
  s << "c-only: branches " << (branches_same ? "bitwise unchanged" : "CHANGED") << ", c "
    << (c_moved ? "updated" : "static") << "; main-only: c " << (c_same ? "bitwise unchanged" : "CHANGED")
    << ", branches " << (branches_moved ? "updated" : "static");
  return {branches_same && c_same && c_moved && branches_moved, s.str()};
}

struct SeedAccuracies {
  double te = 0.0, tie_text = 0.0, tie_image = 0.0, tie_joint = 0.0;
};

constexpr int kSeeds = 5;

// Mean test accuracy per mode over seeds 1..5 on the synthetic benchmark.
SeedAccuracies run_benchmark(double bias_strength, CMode c_mode) {
  SeedAccuracies mean;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    SyntheticConfig sc;
    sc.seed = static_cast<std::uint64_t>(seed);
    sc.bias_strength = bias_strength;
    const SyntheticSplits s = gen_synthetic(sc);
    TrainConfig tc;
    tc.seed = static_cast<std::uint64_t>(seed);
    tc.c_mode = c_mode;
    const ModelParams p = train(tc, s.train).params;
    const EvalReport r = evaluate(p, s.test, kAllModes);
    mean.te += r.find(InferenceMode::kBaseline)->accuracy / kSeeds;
    mean.tie_text += r.find(InferenceMode::kTieText)->accuracy / kSeeds;
    mean.tie_image += r.find(InferenceMode::kTieImage)->accuracy / kSeeds;
    mean.tie_joint += r.find(InferenceMode::kTieJoint)->accuracy / kSeeds;
  }
  return mean;
}

// Shared by the debiasing and ablation criteria.
const SeedAccuracies& default_nonuniform() {
  static const SeedAccuracies acc = run_benchmark(0.9, CMode::kNonUniform);
  return acc;
}

Outcome debias_text() {
  const SeedAccuracies& a = default_nonuniform();
  const double gap = 100.0 * (a.tie_text - a.te);
  return {gap >= 5.0, fmt("TE %.2f%%, TIE_TEXT %.2f%%, gap %+.2f points (need >= +5)", 100.0 * a.te,
                          100.0 * a.tie_text, gap)};
}

Outcome debias_joint() {
  const SeedAccuracies& a = default_nonuniform();
  const double gap = 100.0 * (a.tie_joint - a.te);
  return {gap >= 3.0, fmt("TE %.2f%%, TIE_JOINT %.2f%%, gap %+.2f points (need >= +3)",
                          100.0 * a.te, 100.0 * a.tie_joint, gap)};
}

Outcome null_control() {
  const SeedAccuracies a = run_benchmark(1.0 / 3.0, CMode::kNonUniform);
  const double gap = 100.0 * (a.tie_text - a.te);
  return {std::abs(gap) <= 2.0, fmt("TE %.2f%%, TIE_TEXT %.2f%%, |gap| %.2f points (limit 2)",
                                    100.0 * a.te, 100.0 * a.tie_text, std::abs(gap))};
}

Outcome ablation() {
  const SeedAccuracies& nu = default_nonuniform();
  const SeedAccuracies u = run_benchmark(0.9, CMode::kUniform);
  const double diff = 100.0 * (nu.tie_text - u.tie_text);
  return {diff >= -1.0, fmt("TIE_TEXT nonuniform %.2f%%, uniform %.2f%%, diff %+.2f points (need >= -1)",
                            100.0 * nu.tie_text, 100.0 * u.tie_text, diff)};
}

int cli(std::vector<std::string> args) {
  std::istringstream in;
  std::ostringstream out, err;
  const int code = run_cli(args, in, out, err);
  if (code != 0) std::fprintf(stderr, "cfmsa %s failed: %s\n", args[0].c_str(), err.str().c_str());
  return code;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "cfmsa_acceptance_determinism";
  fs::remove_all(root);
  const std::string data = (root / "data").string();
  if (cli({"synth", "--seed", "5", "--out", data, "--no-timestamp"}) != 0) {
    return {false, "synth failed"};
  }
  std::vector<std::string> digests[2];
  for (int run = 0; run < 2; ++run) {
    // Same invocation twice: outputs echo their own paths.
    const fs::path model = root / "model";
    const fs::path report = root / "report";
    fs::remove_all(model);
    fs::remove_all(report);
    if (cli({"train", "--seed", "5", "--data", data, "--out", model.string(), "--no-timestamp"}) != 0 ||
        cli({"eval", "--checkpoint", (model / "checkpoint.json").string(), "--data", data,
             "--out", report.string(), "--no-timestamp"}) != 0) {
      return {false, "pipeline failed"};
    }
    for (const fs::path& f : {model / "checkpoint.json", model / "history.jsonl",
                              report / "report.json", report / "report.txt"}) {
      digests[run].push_back(file_sha256_hex(f));
    }
  }
  fs::remove_all(root);
  const bool same = digests[0] == digests[1];
  return {same, std::string("checkpoint, history and report digests ") +
                    (same ? "identical across two runs" : "DIFFER across two runs")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"Algebraic identities", 1.0, algebraic_identities},
      {"Monotone fusion", 1.0, monotone_fusion},
      {"Gradient suite", 30.0, gradient_suite},
      {"Gradient routing", 10.0, gradient_routing},
      {"Debiasing: TIE_TEXT vs TE", 180.0, debias_text},
      {"Debiasing: TIE_JOINT vs TE", 180.0, debias_joint},
      {"Null-bias control", 180.0, null_control},
      {"c-hypothesis ablation", 300.0, ablation},
      {"Determinism", 0.0, determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt("%.2f s", secs);
    if (c.time_limit_s > 0.0) {
      timing += fmt(" (limit %.0f s)", c.time_limit_s);
      if (secs > c.time_limit_s) {
        o.passed = false;
        timing += " TOO SLOW";
      }
    }
    failures += !o.passed;
    std::printf("%s  %-28s %s; %s\n", o.passed ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
