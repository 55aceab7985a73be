#include "cfmsa/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "cfmsa/error.hpp"

namespace cfmsa {

std::string_view to_string(CMode mode) {
  switch (mode) {
    case CMode::kRandom: return "random";
    case CMode::kPrior: return "prior";
    case CMode::kUniform: return "uniform";
    case CMode::kNonUniform: return "nonuniform";
  }
  return "unknown";
}

CMode parse_c_mode(std::string_view name) {
  for (CMode m : {CMode::kRandom, CMode::kPrior, CMode::kUniform, CMode::kNonUniform}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("c_mode: unknown value '" + std::string(name) +
                    "' (expected random|prior|uniform|nonuniform)");
}

CGrad::CGrad(std::size_t num_classes) {
  for (Vec& s : slots) s.assign(num_classes, 0.0);
}

CParams::CParams(CMode mode, std::size_t num_classes, Vec values)
    : mode_(mode), num_classes_(num_classes), values_(std::move(values)) {
  if (num_classes_ == 0) throw InvalidInput("CParams: num_classes must be positive");
  const std::size_t expected = mode_ == CMode::kUniform ? 1 : 4 * num_classes_;
  if (values_.size() != expected) {
    throw DimensionMismatch("CParams: expected " + std::to_string(expected) + " values for mode " +
                            std::string(to_string(mode_)) + ", got " +
                            std::to_string(values_.size()));
  }
  require_finite(values_, "CParams");
}

CParams CParams::random(std::size_t num_classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(4 * num_classes);
  for (double& x : v) x = normal(rng);
  return CParams(CMode::kRandom, num_classes, std::move(v));
}

CParams CParams::prior(std::span<const double> class_frequencies) {
  const std::size_t k = class_frequencies.size();
  Vec v;
  v.reserve(4 * k);
  for (int slot = 0; slot < 4; ++slot) {
    for (double f : class_frequencies) v.push_back(std::log(std::max(f, kMinPriorFrequency)));
  }
  return CParams(CMode::kPrior, k, std::move(v));
}

double CParams::uniform_logit(std::size_t num_classes) {
  if (num_classes < 2) return 0.0;
  return -std::log(static_cast<double>(num_classes - 1));
}

CParams CParams::uniform(std::size_t num_classes) {
  return uniform(num_classes, uniform_logit(num_classes));
}

CParams CParams::nonuniform(std::size_t num_classes) {
  return nonuniform(num_classes, uniform_logit(num_classes));
}

CParams CParams::uniform(std::size_t num_classes, double init) {
  return CParams(CMode::kUniform, num_classes, Vec{init});
}

CParams CParams::nonuniform(std::size_t num_classes, double init) {
  return CParams(CMode::kNonUniform, num_classes, Vec(4 * num_classes, init));
}

CParams CParams::from_values(CMode mode, std::size_t num_classes, Vec values) {
  return CParams(mode, num_classes, std::move(values));
}

Vec CParams::slot(CSlot s) const {
  if (mode_ == CMode::kUniform) return Vec(num_classes_, values_[0]);
  const auto begin = values_.begin() + static_cast<std::ptrdiff_t>(
                                           static_cast<std::size_t>(s) * num_classes_);
  return Vec(begin, begin + static_cast<std::ptrdiff_t>(num_classes_));
}

Vec CParams::reduce_grad(const CGrad& grad) const {
  if (mode_ == CMode::kUniform) {
    double total = 0.0;
    for (const Vec& s : grad.slots) {
      for (double g : s) total += g;
    }
    return Vec{total};
  }
  Vec out;
  out.reserve(values_.size());
  for (const Vec& s : grad.slots) {
    if (s.size() != num_classes_) throw DimensionMismatch("CParams::reduce_grad: slot length");
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

std::string_view to_string(InferenceMode mode) {
  switch (mode) {
    case InferenceMode::kBaseline: return "te";
    case InferenceMode::kTieText: return "tie-text";
    case InferenceMode::kTieImage: return "tie-image";
    case InferenceMode::kTieJoint: return "tie-joint";
  }
  return "unknown";
}

InferenceMode parse_inference_mode(std::string_view name) {
  for (InferenceMode m : kAllModes) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("modes: unknown inference mode '" + std::string(name) +
                    "' (expected te|tie-text|tie-image|tie-joint|all)");
}

std::vector<InferenceMode> parse_inference_modes(std::string_view list) {
  if (list == "all") return {kAllModes.begin(), kAllModes.end()};
  std::vector<InferenceMode> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    const std::string_view item = list.substr(pos, comma - pos);
    if (!item.empty()) {
      const InferenceMode m = parse_inference_mode(item);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("modes: empty mode list");
  return out;
}

Vec fuse(std::span<const double> z_t, std::span<const double> z_i, std::span<const double> z_k) {
  if (z_t.size() != z_i.size() || z_t.size() != z_k.size()) {
    throw DimensionMismatch("fuse: branch score lengths differ");
  }
  Vec out(z_t.size());
  for (std::size_t y = 0; y < out.size(); ++y) out[y] = log_sigmoid(z_t[y] + z_i[y] + z_k[y]);
  return out;
}

ScoreBundle assemble(Vec z_t, Vec z_i, Vec z_k, const CParams& c) {
  if (z_t.size() != c.num_classes()) throw DimensionMismatch("assemble: c has wrong class count");
  const Vec c1 = c.slot(CSlot::kText);
  const Vec c2 = c.slot(CSlot::kImage);
  const Vec c3 = c.slot(CSlot::kJointTextOnly);
  const Vec c4 = c.slot(CSlot::kJointImageOnly);
  ScoreBundle b;
  b.fused_full = fuse(z_t, z_i, z_k);
  b.fused_text_masked = fuse(z_t, c2, c3);
  b.fused_image_masked = fuse(c1, z_i, c4);
  b.fused_reference = fuse(c1, c2, c3);
  b.z_t = std::move(z_t);
  b.z_i = std::move(z_i);
  b.z_k = std::move(z_k);
  return b;
}

namespace {

Vec combine(double a, const Vec& x, double b, const Vec& y) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
  return out;
}

}  // namespace

Vec total_effect(const ScoreBundle& b) { return combine(1.0, b.fused_full, -1.0, b.fused_reference); }

Vec natural_direct_effect_text(const ScoreBundle& b) {
  return combine(1.0, b.fused_text_masked, -1.0, b.fused_reference);
}

Vec natural_direct_effect_image(const ScoreBundle& b) {
  return combine(1.0, b.fused_image_masked, -1.0, b.fused_reference);
}

Vec tie_text(const ScoreBundle& b) { return combine(1.0, b.fused_full, -1.0, b.fused_text_masked); }

Vec tie_image(const ScoreBundle& b) { return combine(1.0, b.fused_full, -1.0, b.fused_image_masked); }

Vec tie_joint(const ScoreBundle& b) {
  Vec out(b.fused_full.size());
  for (std::size_t y = 0; y < out.size(); ++y) {
    out[y] = 2.0 * b.fused_full[y] - b.fused_text_masked[y] - b.fused_image_masked[y];
  }
  return out;
}

Vec decision_scores(const ScoreBundle& b, InferenceMode mode) {
  switch (mode) {
    case InferenceMode::kBaseline: return b.fused_full;
    case InferenceMode::kTieText: return tie_text(b);
    case InferenceMode::kTieImage: return tie_image(b);
    case InferenceMode::kTieJoint: return tie_joint(b);
  }
  throw InvalidInput("decision_scores: unknown mode");
}

ClassIndex predict(const ScoreBundle& b, InferenceMode mode) {
  return argmax(decision_scores(b, mode));
}

}  // namespace cfmsa
