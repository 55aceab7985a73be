#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfmsa/branches.hpp"
#include "cfmsa/counterfactual.hpp"
#include "cfmsa/data.hpp"
#include "cfmsa/losses.hpp"

namespace cfmsa {

inline constexpr int kCheckpointSchemaVersion = 1;

struct ModelDims {
  std::size_t d_t = 0;
  std::size_t d_i = 0;
  std::size_t hidden_dim = 32;
  std::size_t num_classes = 3;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct ModelSeeds {
  std::uint64_t text = 0;
  std::uint64_t image = 0;
  std::uint64_t joint = 0;
  std::uint64_t c = 0;
};

// The three branch scorers plus the blocked-input constants.
struct ModelParams {
  BranchParams text;
  BranchParams image;
  BranchParams joint;  // scores concat(text, image)
  CParams c;
  std::vector<std::string> labels;
  ModelSeeds seeds;

  ModelDims dims() const;
};

// Per-branch seeds are derived from `seed`. class_frequencies is required for
// CMode::kPrior and ignored otherwise.
ModelParams init_model(const ModelDims& dims, CMode c_mode, std::uint64_t seed,
                       std::span<const double> class_frequencies = {},
                       std::vector<std::string> labels = default_label_names());

// Throws DimensionMismatch when the dataset header disagrees with the model.
void check_compatible(const ModelParams& params, const DatasetHeader& header);

struct ForwardPass {
  std::optional<BranchActivations> text;
  std::optional<BranchActivations> image;
  std::optional<BranchActivations> joint;
  ScoreBundle bundle;

  bool has_text() const { return text.has_value(); }
  bool has_image() const { return image.has_value(); }
};

// Scores one sample. An absent modality is replaced by its blocked constant:
// no text gives z_t = c1, z_k = c4; no image gives z_i = c2, z_k = c3.
ForwardPass forward(const ModelParams& params, const Sample& sample);

// Gradient buffers for the branch group. c never appears here.
struct BranchGradients {
  Vec text;
  Vec image;
  Vec joint;

  explicit BranchGradients(const ModelParams& params);
};

// Accumulates scale * d L_cls / d branch params. Terms whose branch output is
// missing for this sample are skipped.
void accumulate_cls_grad(const ModelParams& params, const ForwardPass& fp, ClassIndex label,
                         std::span<const double> weights, double scale, BranchGradients& out,
                         ClsSelection which = {});

// Accumulates scale * d (L_kl + L_ti) / d c into out (CParams storage layout).
void accumulate_c_grad(const ModelParams& params, const ForwardPass& fp, double scale,
                       std::span<double> out);

// Per-sample loss breakdown with missing-branch terms set to zero.
LossBreakdown sample_losses(const ForwardPass& fp, ClassIndex label,
                            std::span<const double> weights);

nlohmann::ordered_json checkpoint_to_json(const ModelParams& params);
ModelParams checkpoint_from_json(const nlohmann::json& j);

// Writes the checkpoint with an optional "run_config" echo.
std::string serialize_checkpoint(const ModelParams& params,
                                 const nlohmann::ordered_json* run_config = nullptr);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const nlohmann::ordered_json* run_config = nullptr);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace cfmsa
