#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfmsa/numerics.hpp"

namespace cfmsa {

inline constexpr const char* kFeatureSchema = "cfmsa-features/1";

// Label order follows the sentiment convention positive, neutral, negative.
std::vector<std::string> default_label_names();

struct DatasetHeader {
  std::size_t d_t = 0;
  std::size_t d_i = 0;
  std::vector<std::string> labels;

  std::size_t num_classes() const { return labels.size(); }
  // Throws ParseError when the label is not part of the header.
  ClassIndex label_index(const std::string& name) const;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

// An absent modality is std::nullopt.
struct Sample {
  std::string id;
  std::optional<Vec> text;
  std::optional<Vec> image;
  ClassIndex label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Provenance {
  std::string source;
  std::string digest;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Sample> samples;
  Provenance provenance;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  // Checks every sample against the header. Throws InvalidInput/DimensionMismatch.
  void validate() const;
};

// Feature JSONL: a header line followed by one sample per line.
Dataset parse_features(std::istream& in, const std::string& source = "stream");
Dataset load_features(const std::filesystem::path& path);
std::string serialize_features(const Dataset& d);
void save_features(const Dataset& d, const std::filesystem::path& path);

// Parses one sample line against a known header. line_no is used in errors.
Sample parse_sample_line(const std::string& line, const DatasetHeader& header,
                         std::size_t line_no = 0);

struct ClassStats {
  std::vector<std::size_t> counts;
  Vec frequencies;
  // total / (num_classes * count); zero for classes with no samples.
  Vec weights;
};

ClassStats class_stats(const Dataset& d);

enum class BiasModality { kText, kImage };

struct SyntheticConfig {
  std::size_t n_train = 3000;
  std::size_t n_val = 500;
  std::size_t n_test = 1000;
  std::size_t d_t = 16;
  std::size_t d_i = 16;
  // MVSA-Single class proportions 2683/470/1358 of 4511.
  Vec class_priors = {2683.0 / 4511.0, 470.0 / 4511.0, 1358.0 / 4511.0};
  double signal_scale = 1.0;
  double noise_scale = 0.5;
  std::size_t bias_dims = 4;
  double bias_strength = 0.9;
  bool bias_flip_at_test = true;
  BiasModality bias_modality = BiasModality::kText;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Relative strength of the true signal carried by the biased modality.
inline constexpr double kBiasedModalitySignal = 0.3;

void to_json(nlohmann::json& j, const SyntheticConfig& cfg);
// Missing keys keep their defaults. Throws ConfigError on type errors.
void from_json(const nlohmann::json& j, SyntheticConfig& cfg);

struct SyntheticSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

SyntheticSplits gen_synthetic(const SyntheticConfig& cfg);

// Stratified seeded split. fractions must be non-negative and sum to 1.
std::vector<Dataset> split(const Dataset& d, std::span<const double> fractions, std::uint64_t seed);

}  // namespace cfmsa
