#include "cfmsa/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "cfmsa/error.hpp"
#include "cfmsa/parallel.hpp"

namespace cfmsa {

const ModeMetrics* EvalReport::find(InferenceMode mode) const {
  for (const ModeMetrics& m : modes) {
    if (m.mode == mode) return &m;
  }
  return nullptr;
}

ModeMetrics metrics_from_confusion(const ConfusionMatrix& confusion, InferenceMode mode) {
  const std::size_t k = confusion.size();
  ModeMetrics m;
  m.mode = mode;
  m.confusion = confusion;
  m.per_class.resize(k);
  std::size_t total = 0, correct = 0;
  std::vector<std::size_t> predicted(k, 0);
  for (std::size_t t = 0; t < k; ++t) {
    if (confusion[t].size() != k) throw DimensionMismatch("confusion matrix must be square");
    for (std::size_t p = 0; p < k; ++p) {
      total += confusion[t][p];
      predicted[p] += confusion[t][p];
    }
    correct += confusion[t][t];
  }
  for (std::size_t c = 0; c < k; ++c) {
    ClassMetrics& cm = m.per_class[c];
    for (std::size_t p = 0; p < k; ++p) cm.support += confusion[c][p];
    const double tp = static_cast<double>(confusion[c][c]);
    cm.precision = predicted[c] == 0 ? 0.0 : tp / static_cast<double>(predicted[c]);
    cm.recall = cm.support == 0 ? 0.0 : tp / static_cast<double>(cm.support);
    cm.f1 = cm.precision + cm.recall == 0.0
                ? 0.0
                : 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall);
  }
  m.accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  double macro = 0.0, weighted = 0.0;
  for (const ClassMetrics& cm : m.per_class) {
    macro += cm.f1;
    weighted += cm.f1 * static_cast<double>(cm.support);
  }
  m.macro_f1 = k == 0 ? 0.0 : macro / static_cast<double>(k);
  m.weighted_f1 = total == 0 ? 0.0 : weighted / static_cast<double>(total);
  return m;
}

ModeMetrics metrics_from_predictions(std::span<const ClassIndex> truth,
                                     std::span<const ClassIndex> predicted,
                                     std::size_t num_classes, InferenceMode mode) {
  if (truth.size() != predicted.size()) throw DimensionMismatch("prediction count mismatch");
  ConfusionMatrix cm(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw InvalidInput("metrics: class index out of range");
    }
    ++cm[truth[i]][predicted[i]];
  }
  return metrics_from_confusion(cm, mode);
}

EvalReport evaluate(const ModelParams& params, const Dataset& d,
                    std::span<const InferenceMode> modes) {
  if (d.empty()) throw InvalidInput("evaluate: empty dataset");
  check_compatible(params, d.header);
  const std::size_t n = d.size();
  const std::size_t k = d.header.num_classes();
  // predictions[i][m]; slot 0 always holds the baseline for deltas.
  std::vector<InferenceMode> all{InferenceMode::kBaseline};
  for (InferenceMode m : modes) {
    if (std::find(all.begin(), all.end(), m) == all.end()) all.push_back(m);
  }
  std::vector<std::vector<ClassIndex>> predictions(all.size(), std::vector<ClassIndex>(n));
  parallel_for(n, [&](std::size_t i) {
    const ScoreBundle b = forward(params, d.samples[i]).bundle;
    for (std::size_t m = 0; m < all.size(); ++m) predictions[m][i] = predict(b, all[m]);
  });
  std::vector<ClassIndex> truth(n);
  for (std::size_t i = 0; i < n; ++i) truth[i] = d.samples[i].label;

  const ModeMetrics baseline =
      metrics_from_predictions(truth, predictions[0], k, InferenceMode::kBaseline);
  EvalReport report;
  report.labels = d.header.labels;
  report.num_samples = n;
  for (InferenceMode mode : modes) {
    const std::size_t m = static_cast<std::size_t>(std::find(all.begin(), all.end(), mode) -
                                                   all.begin());
    if (std::any_of(report.modes.begin(), report.modes.end(),
                    [mode](const ModeMetrics& x) { return x.mode == mode; })) {
      continue;
    }
    ModeMetrics mm = metrics_from_predictions(truth, predictions[m], k, mode);
    mm.delta_accuracy = mm.accuracy - baseline.accuracy;
    mm.delta_macro_f1 = mm.macro_f1 - baseline.macro_f1;
    mm.delta_weighted_f1 = mm.weighted_f1 - baseline.weighted_f1;
    report.modes.push_back(std::move(mm));
  }
  return report;
}

nlohmann::ordered_json report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["labels"] = report.labels;
  j["num_samples"] = report.num_samples;
  nlohmann::ordered_json modes = nlohmann::ordered_json::object();
  for (const ModeMetrics& m : report.modes) {
    nlohmann::ordered_json e;
    e["accuracy"] = m.accuracy;
    e["macro_f1"] = m.macro_f1;
    e["weighted_f1"] = m.weighted_f1;
    e["delta_accuracy"] = m.delta_accuracy;
    e["delta_macro_f1"] = m.delta_macro_f1;
    e["delta_weighted_f1"] = m.delta_weighted_f1;
    nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < m.per_class.size(); ++c) {
      const ClassMetrics& cm = m.per_class[c];
      per_class[report.labels.at(c)] = {{"precision", cm.precision},
                                        {"recall", cm.recall},
                                        {"f1", cm.f1},
                                        {"support", cm.support}};
    }
    e["per_class"] = per_class;
    e["confusion"] = m.confusion;
    modes[std::string(to_string(m.mode))] = e;
  }
  j["modes"] = modes;
  return j;
}

namespace {

std::string mode_label(InferenceMode m) {
  switch (m) {
    case InferenceMode::kBaseline: return "Baseline (TE)";
    case InferenceMode::kTieText: return "Removing Text Bias";
    case InferenceMode::kTieImage: return "Removing Image Bias";
    case InferenceMode::kTieJoint: return "Removing Text-Image Bias";
  }
  return "?";
}

std::string cell(double value, double delta, bool baseline) {
  char buf[48];
  if (baseline) {
    std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * value);
  } else {
    std::snprintf(buf, sizeof buf, "%6.2f (%+.2f)", 100.0 * value, 100.0 * delta);
  }
  return buf;
}

}  // namespace

std::string compare_report(std::span<const NamedReport> reports) {
  if (reports.empty()) throw InvalidInput("compare_report: no reports");
  std::vector<InferenceMode> rows;
  for (const NamedReport& r : reports) {
    for (const ModeMetrics& m : r.report.modes) {
      if (std::find(rows.begin(), rows.end(), m.mode) == rows.end()) rows.push_back(m.mode);
    }
  }
  std::sort(rows.begin(), rows.end());

  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"Condition"};
  for (const NamedReport& r : reports) {
    header.push_back(r.name + " ACC");
    header.push_back(r.name + " macro-F1");
    header.push_back(r.name + " weighted-F1");
  }
  table.push_back(header);
  for (InferenceMode mode : rows) {
    std::vector<std::string> row{mode_label(mode)};
    const bool base = mode == InferenceMode::kBaseline;
    for (const NamedReport& r : reports) {
      const ModeMetrics* m = r.report.find(mode);
      if (!m) {
        row.insert(row.end(), {"-", "-", "-"});
        continue;
      }
      row.push_back(cell(m->accuracy, m->delta_accuracy, base));
      row.push_back(cell(m->macro_f1, m->delta_macro_f1, base));
      row.push_back(cell(m->weighted_f1, m->delta_weighted_f1, base));
    }
    table.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (std::size_t c = 0; c < table[r].size(); ++c) {
      const std::string& s = table[r][c];
      out << s;
      if (c + 1 == table[r].size()) {
        out << '\n';
      } else {
        out << std::string(width[c] - s.size() + 2, ' ');
      }
    }
    if (r == 0) {
      std::size_t line = 0;
      for (std::size_t w : width) line += w + 2;
      out << std::string(line - 2, '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace cfmsa
