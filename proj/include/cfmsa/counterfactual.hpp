#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfmsa/numerics.hpp"

namespace cfmsa {

// How the no-treatment constants c1..c4 are initialized and whether they learn.
enum class CMode { kRandom, kPrior, kUniform, kNonUniform };

std::string_view to_string(CMode mode);
// Throws ConfigError on an unknown name.
CMode parse_c_mode(std::string_view name);

// The four blocked-input constants:
//   c1 replaces z_t when text is absent,
//   c2 replaces z_i when image is absent,
//   c3 replaces z_k when text is present and image absent,
//   c4 replaces z_k when image is present and text absent.
enum class CSlot : std::size_t { kText = 0, kImage = 1, kJointTextOnly = 2, kJointImageOnly = 3 };

// Gradient of some objective with respect to each expanded slot vector.
struct CGrad {
  std::array<Vec, 4> slots;

  explicit CGrad(std::size_t num_classes);
  Vec& operator[](CSlot s) { return slots[static_cast<std::size_t>(s)]; }
  const Vec& operator[](CSlot s) const { return slots[static_cast<std::size_t>(s)]; }
};

class CParams {
 public:
  // Seeded standard normal entries, frozen.
  static CParams random(std::size_t num_classes, std::uint64_t seed);
  // log of the class frequencies in every slot, frozen. Frequencies are floored
  // at kMinPriorFrequency so empty classes still yield finite constants.
  static CParams prior(std::span<const double> class_frequencies);
  // Initial value for the learnable modes: the logit whose sigmoid is the
  // uniform class probability 1/|Y|, i.e. log(1 / (|Y| - 1)).
  static double uniform_logit(std::size_t num_classes);

  // One learnable scalar shared by every slot and class.
  static CParams uniform(std::size_t num_classes);
  static CParams uniform(std::size_t num_classes, double init);
  // Four learnable per-class vectors.
  static CParams nonuniform(std::size_t num_classes);
  static CParams nonuniform(std::size_t num_classes, double init);
  // Rebuild from stored values (checkpoint loading). Validates the length.
  static CParams from_values(CMode mode, std::size_t num_classes, Vec values);

  static constexpr double kMinPriorFrequency = 1e-6;

  CMode mode() const { return mode_; }
  bool learnable() const { return mode_ == CMode::kUniform || mode_ == CMode::kNonUniform; }
  std::size_t num_classes() const { return num_classes_; }

  Vec slot(CSlot s) const;

  // Raw storage: one value in uniform mode, 4 * num_classes otherwise.
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  // Maps per-slot gradients onto the storage layout (summing for uniform mode).
  Vec reduce_grad(const CGrad& grad) const;

 private:
  CParams(CMode mode, std::size_t num_classes, Vec values);

  CMode mode_;
  std::size_t num_classes_;
  Vec values_;
};

// Raw branch logits plus the fused scores used by training and inference.
struct ScoreBundle {
  Vec z_t;
  Vec z_i;
  Vec z_k;
  Vec fused_full;          // h(z_t, z_i, z_k)
  Vec fused_text_masked;   // h(z_t, c2, c3): image and mediator blocked
  Vec fused_image_masked;  // h(c1, z_i, c4): text and mediator blocked
  Vec fused_reference;     // h(c1, c2, c3): everything blocked, diagnostics only
};

enum class InferenceMode { kBaseline, kTieText, kTieImage, kTieJoint };

inline constexpr std::array<InferenceMode, 4> kAllModes = {
    InferenceMode::kBaseline, InferenceMode::kTieText, InferenceMode::kTieImage,
    InferenceMode::kTieJoint};

std::string_view to_string(InferenceMode mode);
InferenceMode parse_inference_mode(std::string_view name);
// Comma separated list, "all" expands to every mode.
std::vector<InferenceMode> parse_inference_modes(std::string_view list);

// SUM fusion: log sigmoid(z_t + z_i + z_k), elementwise.
Vec fuse(std::span<const double> z_t, std::span<const double> z_i, std::span<const double> z_k);

ScoreBundle assemble(Vec z_t, Vec z_i, Vec z_k, const CParams& c);

Vec total_effect(const ScoreBundle& b);
Vec natural_direct_effect_text(const ScoreBundle& b);
Vec natural_direct_effect_image(const ScoreBundle& b);

// fused_full - fused_text_masked
Vec tie_text(const ScoreBundle& b);
// fused_full - fused_image_masked
Vec tie_image(const ScoreBundle& b);
// 2 fused_full - fused_text_masked - fused_image_masked
Vec tie_joint(const ScoreBundle& b);

// The score vector a mode ranks classes by.
Vec decision_scores(const ScoreBundle& b, InferenceMode mode);

// argmax of decision_scores, ties to the lowest class index.
ClassIndex predict(const ScoreBundle& b, InferenceMode mode);

}  // namespace cfmsa
