#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cfmsa/counterfactual.hpp"
#include "cfmsa/data.hpp"
#include "cfmsa/losses.hpp"
#include "cfmsa/model.hpp"

namespace cfmsa {

// Defaults follow the reference protocol: AdamW with zero weight decay, fusion
// learning rate 3e-3, c learning rate 1e-5, 20 epochs, batch 16 and class
// weights [1.68, 9.3, 3.36] for (positive, neutral, negative).
struct TrainConfig {
  double lr_main = 3e-3;
  double lr_c = 1e-5;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  Vec class_weights = {1.68, 9.3, 3.36};
  CMode c_mode = CMode::kNonUniform;
  std::size_t hidden_dim = 32;
  double weight_decay = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Group switches. Both on for normal training.
  bool update_main = true;
  bool update_c = true;

  // Throws ConfigError naming the offending field.
  void validate(std::size_t num_classes) const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamState {
  Vec m;
  Vec v;
  std::uint64_t step = 0;
};

// One decoupled-weight-decay Adam update with bias correction. The state is
// sized lazily on the first call.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper);

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown train_mean;
  // Empty when no validation set was given.
  std::vector<std::pair<InferenceMode, double>> val_accuracy;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

nlohmann::ordered_json epoch_to_json(const EpochRecord& rec);

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

// Fresh parameters from the config seed, then training.
TrainResult train(const TrainConfig& config, const Dataset& train_set,
                  const Dataset* val_set = nullptr);

// Continues from the given parameters.
TrainResult train_from(ModelParams params, const TrainConfig& config, const Dataset& train_set,
                       const Dataset* val_set = nullptr);

}  // namespace cfmsa
