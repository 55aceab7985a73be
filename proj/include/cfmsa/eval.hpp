#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfmsa/counterfactual.hpp"
#include "cfmsa/data.hpp"
#include "cfmsa/model.hpp"

namespace cfmsa {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

// confusion[true][predicted]
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

struct ModeMetrics {
  InferenceMode mode = InferenceMode::kBaseline;
  double accuracy = 0.0;
  double macro_f1 = 0.0;     // zero-support classes contribute F1 = 0
  double weighted_f1 = 0.0;  // support weighted
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix confusion;
  // Differences against the baseline on the same data.
  double delta_accuracy = 0.0;
  double delta_macro_f1 = 0.0;
  double delta_weighted_f1 = 0.0;
};

struct EvalReport {
  std::vector<std::string> labels;
  std::size_t num_samples = 0;
  std::vector<ModeMetrics> modes;

  // nullptr when the mode was not evaluated.
  const ModeMetrics* find(InferenceMode mode) const;
};

ModeMetrics metrics_from_confusion(const ConfusionMatrix& confusion, InferenceMode mode);
ModeMetrics metrics_from_predictions(std::span<const ClassIndex> truth,
                                     std::span<const ClassIndex> predicted,
                                     std::size_t num_classes, InferenceMode mode);

// Scores every sample once and applies each requested mode. Samples missing a
// modality use the blocked constants in place of the absent branch outputs.
EvalReport evaluate(const ModelParams& params, const Dataset& d,
                    std::span<const InferenceMode> modes);

nlohmann::ordered_json report_to_json(const EvalReport& report);

struct NamedReport {
  std::string name;
  EvalReport report;
};

// Plain-text table: one row per mode, accuracy and macro/weighted F1 (percent)
// per dataset with deltas against the baseline row.
std::string compare_report(std::span<const NamedReport> reports);

}  // namespace cfmsa
