#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cfmsa/error.hpp"
#include "cfmsa/eval.hpp"

using namespace cfmsa;

namespace {

ModeMetrics from(std::vector<ClassIndex> truth, std::vector<ClassIndex> pred,
                 InferenceMode mode = InferenceMode::kBaseline) {
  return metrics_from_predictions(truth, pred, 3, mode);
}

Dataset small_synthetic(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_train = 60;
  cfg.n_val = 1;
  cfg.n_test = 1;
  cfg.d_t = cfg.d_i = 6;
  cfg.seed = seed;
  return gen_synthetic(cfg).train;
}

}  // namespace

TEST_CASE("perfect predictor") {
  const ModeMetrics m = from({0, 1, 2, 2, 0}, {0, 1, 2, 2, 0});
  CHECK(m.accuracy == 1.0);
  CHECK(m.macro_f1 == 1.0);
  CHECK(m.weighted_f1 == 1.0);
  CHECK(m.confusion[2][2] == 2);
}

TEST_CASE("constant predictor") {
  const ModeMetrics m = from({0, 0, 1, 2}, {0, 0, 0, 0});
  CHECK(m.accuracy == 0.5);
  CHECK(m.per_class[0].precision == 0.5);
  CHECK(m.per_class[0].recall == 1.0);
  CHECK(m.per_class[1].f1 == 0.0);
  CHECK(m.macro_f1 == doctest::Approx(2.0 / 9.0).epsilon(1e-15));
  CHECK(m.weighted_f1 == doctest::Approx(0.5 * 2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("metrics recompute from the confusion matrix") {
  const std::vector<ClassIndex> truth{0, 1, 2, 0, 1, 2, 0, 0, 2, 1, 1, 0};
  const std::vector<ClassIndex> pred{0, 2, 2, 1, 1, 0, 0, 0, 2, 1, 0, 2};
  const ModeMetrics m = from(truth, pred, InferenceMode::kTieText);
  const ModeMetrics again = metrics_from_confusion(m.confusion, InferenceMode::kTieText);
  CHECK(again.accuracy == m.accuracy);
  CHECK(again.macro_f1 == m.macro_f1);
  CHECK(again.weighted_f1 == m.weighted_f1);

  // Independent arithmetic for class 0: tp 3, fp 2, fn 2.
  CHECK(m.per_class[0].precision == doctest::Approx(0.6));
  CHECK(m.per_class[0].recall == doctest::Approx(0.6));
  CHECK(m.per_class[0].support == 5);
  std::size_t total = 0;
  for (const auto& row : m.confusion) {
    for (std::size_t x : row) total += x;
  }
  CHECK(total == truth.size());
  CHECK_THROWS_AS(metrics_from_predictions(truth, std::vector<ClassIndex>{0}, 3,
                                           InferenceMode::kBaseline),
                  DimensionMismatch);
}

TEST_CASE("zero-support class contributes zero to macro F1") {
  const ModeMetrics m = from({0, 0, 1, 1}, {0, 0, 1, 1});
  CHECK(m.macro_f1 == doctest::Approx(2.0 / 3.0));
  CHECK(m.weighted_f1 == 1.0);
}

TEST_CASE("evaluate agrees with per-sample prediction and fills deltas") {
  const Dataset d = small_synthetic(3);
  const ModelParams p = init_model({6, 6, 8, 3}, CMode::kRandom, 5);
  const std::string before = serialize_checkpoint(p);
  const EvalReport r = evaluate(p, d, kAllModes);
  CHECK(serialize_checkpoint(p) == before);
  CHECK(r.num_samples == d.size());
  REQUIRE(r.modes.size() == 4);
  const ModeMetrics* base = r.find(InferenceMode::kBaseline);
  REQUIRE(base != nullptr);
  for (const ModeMetrics& m : r.modes) {
    std::size_t correct = 0;
    for (const Sample& s : d.samples) correct += predict(forward(p, s).bundle, m.mode) == s.label;
    CHECK(m.accuracy == static_cast<double>(correct) / static_cast<double>(d.size()));
    CHECK(m.delta_accuracy == m.accuracy - base->accuracy);
    CHECK(m.delta_macro_f1 == m.macro_f1 - base->macro_f1);
  }

  const EvalReport only = evaluate(p, d, std::array{InferenceMode::kTieImage});
  REQUIRE(only.modes.size() == 1);
  CHECK(only.modes[0].delta_accuracy == r.find(InferenceMode::kTieImage)->delta_accuracy);
  CHECK(only.find(InferenceMode::kBaseline) == nullptr);
}

TEST_CASE("evaluate handles missing modalities") {
  Dataset d = small_synthetic(4);
  for (std::size_t k = 0; k < d.size(); k += 3) d.samples[k].image.reset();
  const ModelParams p = init_model({6, 6, 8, 3}, CMode::kNonUniform, 1);
  const EvalReport r = evaluate(p, d, kAllModes);
  CHECK(r.num_samples == d.size());
}

TEST_CASE("compare_report") {
  EvalReport r;
  r.labels = default_label_names();
  r.num_samples = 4;
  ModeMetrics base = from({0, 1, 2, 0}, {0, 0, 0, 0});
  ModeMetrics tie = from({0, 1, 2, 0}, {0, 1, 0, 0}, InferenceMode::kTieText);
  tie.delta_accuracy = tie.accuracy - base.accuracy;
  tie.delta_macro_f1 = tie.macro_f1 - base.macro_f1;
  tie.delta_weighted_f1 = tie.weighted_f1 - base.weighted_f1;
  r.modes = {base, tie};
  const std::vector<NamedReport> reports{{"Synth", r}};
  const std::string table = compare_report(reports);
  CHECK(table.find("Baseline (TE)") != std::string::npos);
  CHECK(table.find("Removing Text Bias") != std::string::npos);
  CHECK(table.find(" 75.00 (+25.00)") != std::string::npos);
  CHECK(table.find("Synth ACC") != std::string::npos);
  CHECK(table.find(" \n") == std::string::npos);
  CHECK_THROWS_AS(compare_report(std::span<const NamedReport>{}), InvalidInput);

  const auto j = report_to_json(r);
  CHECK(j["modes"].size() == 2);
}
