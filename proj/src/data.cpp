#include "cfmsa/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "cfmsa/digest.hpp"
#include "cfmsa/error.hpp"

namespace cfmsa {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::string> default_label_names() { return {"positive", "neutral", "negative"}; }

ClassIndex DatasetHeader::label_index(const std::string& name) const {
  const auto it = std::find(labels.begin(), labels.end(), name);
  if (it == labels.end()) throw ParseError("unknown label name '" + name + "'");
  return static_cast<ClassIndex>(it - labels.begin());
}

void Dataset::validate() const {
  if (header.labels.empty()) throw InvalidInput("dataset header has no labels");
  for (const Sample& s : samples) {
    if (!s.text && !s.image) throw InvalidInput("sample '" + s.id + "': no modality present");
    if (s.label >= header.num_classes()) {
      throw InvalidInput("sample '" + s.id + "': label out of range");
    }
    if (s.text && s.text->size() != header.d_t) {
      throw DimensionMismatch("sample '" + s.id + "': text dim " + std::to_string(s.text->size()) +
                              " != header d_t " + std::to_string(header.d_t));
    }
    if (s.image && s.image->size() != header.d_i) {
      throw DimensionMismatch("sample '" + s.id + "': image dim " +
                              std::to_string(s.image->size()) + " != header d_i " +
                              std::to_string(header.d_i));
    }
    if (s.text) require_finite(*s.text, "text features");
    if (s.image) require_finite(*s.image, "image features");
  }
}

namespace {

std::string at_line(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

std::optional<Vec> parse_modality(const json& j, const char* key, std::size_t dim,
                                  std::size_t line_no) {
  if (!j.contains(key)) throw ParseError(at_line(line_no) + "missing field '" + key + "'");
  const json& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_array()) throw ParseError(at_line(line_no) + "'" + key + "' must be an array or null");
  Vec out;
  out.reserve(v.size());
  for (const json& x : v) {
    if (!x.is_number()) throw ParseError(at_line(line_no) + "'" + key + "' has a non-numeric entry");
    out.push_back(x.get<double>());
  }
  if (out.size() != dim) {
    throw ParseError(at_line(line_no) + "'" + key + "' has dim " + std::to_string(out.size()) +
                     ", header declares " + std::to_string(dim));
  }
  return out;
}

DatasetHeader parse_header(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(at_line(1) + "malformed header: " + e.what());
  }
  if (!j.is_object() || j.value("schema", "") != kFeatureSchema) {
    throw ParseError(at_line(1) + "header schema must be '" + std::string(kFeatureSchema) + "'");
  }
  DatasetHeader h;
  try {
    h.d_t = j.at("d_t").get<std::size_t>();
    h.d_i = j.at("d_i").get<std::size_t>();
    h.labels = j.at("labels").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(at_line(1) + "bad header field: " + e.what());
  }
  if (h.labels.empty()) throw ParseError(at_line(1) + "header has no labels");
  return h;
}

}  // namespace

Sample parse_sample_line(const std::string& line, const DatasetHeader& header,
                         std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(at_line(line_no) + "malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw ParseError(at_line(line_no) + "record must be a JSON object");
  Sample s;
  if (j.contains("id") && j.at("id").is_string()) {
    s.id = j.at("id").get<std::string>();
  } else {
    throw ParseError(at_line(line_no) + "missing string field 'id'");
  }
  s.text = parse_modality(j, "text", header.d_t, line_no);
  s.image = parse_modality(j, "image", header.d_i, line_no);
  if (!s.text && !s.image) throw ParseError(at_line(line_no) + "no modality present");
  if (!j.contains("label") || !j.at("label").is_string()) {
    throw ParseError(at_line(line_no) + "missing string field 'label'");
  }
  try {
    s.label = header.label_index(j.at("label").get<std::string>());
  } catch (const ParseError& e) {
    throw ParseError(at_line(line_no) + e.what());
  }
  return s;
}

Dataset parse_features(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(at_line(1) + "missing header");
  std::string raw = line + '\n';
  Dataset d;
  d.header = parse_header(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    raw += line;
    raw += '\n';
    if (line.empty()) continue;
    d.samples.push_back(parse_sample_line(line, d.header, line_no));
  }
  d.provenance = {source, sha256_hex(raw)};
  return d;
}

Dataset load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file " + path.string());
  return parse_features(in, path.string());
}

std::string serialize_features(const Dataset& d) {
  std::string out;
  ordered_json header;
  header["schema"] = kFeatureSchema;
  header["d_t"] = d.header.d_t;
  header["d_i"] = d.header.d_i;
  header["labels"] = d.header.labels;
  out += header.dump();
  out += '\n';
  for (const Sample& s : d.samples) {
    ordered_json rec;
    rec["id"] = s.id;
    rec["text"] = s.text ? ordered_json(*s.text) : ordered_json(nullptr);
    rec["image"] = s.image ? ordered_json(*s.image) : ordered_json(nullptr);
    rec["label"] = d.header.labels.at(s.label);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void save_features(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write feature file " + path.string());
  out << serialize_features(d);
  if (!out) throw Error("write failed for " + path.string());
}

ClassStats class_stats(const Dataset& d) {
  if (d.empty()) throw InvalidInput("class_stats: empty dataset");
  const std::size_t k = d.header.num_classes();
  ClassStats st;
  st.counts.assign(k, 0);
  for (const Sample& s : d.samples) ++st.counts.at(s.label);
  const double total = static_cast<double>(d.size());
  st.frequencies.resize(k);
  st.weights.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    st.frequencies[c] = static_cast<double>(st.counts[c]) / total;
    st.weights[c] = st.counts[c] == 0
                        ? 0.0
                        : total / (static_cast<double>(k) * static_cast<double>(st.counts[c]));
  }
  return st;
}

void SyntheticConfig::validate() const {
  if (n_train == 0) throw ConfigError("n_train: must be positive");
  if (d_t == 0) throw ConfigError("d_t: must be positive");
  if (d_i == 0) throw ConfigError("d_i: must be positive");
  if (class_priors.size() < 2) throw ConfigError("class_priors: need at least two classes");
  double sum = 0.0;
  for (double p : class_priors) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("class_priors: entries must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("class_priors: must sum to 1");
  if (!(signal_scale >= 0.0) || !std::isfinite(signal_scale)) {
    throw ConfigError("signal_scale: must be finite and >= 0");
  }
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw ConfigError("noise_scale: must be finite and >= 0");
  }
  if (!(bias_strength >= 0.0 && bias_strength <= 1.0)) {
    throw ConfigError("bias_strength: must lie in [0, 1]");
  }
  const std::size_t biased_dim = bias_modality == BiasModality::kText ? d_t : d_i;
  if (bias_dims == 0 || bias_dims >= biased_dim) {
    throw ConfigError("bias_dims: must be in [1, dim of the biased modality)");
  }
}

void to_json(nlohmann::json& j, const SyntheticConfig& cfg) {
  j = json{{"n_train", cfg.n_train},
           {"n_val", cfg.n_val},
           {"n_test", cfg.n_test},
           {"d_t", cfg.d_t},
           {"d_i", cfg.d_i},
           {"class_priors", cfg.class_priors},
           {"signal_scale", cfg.signal_scale},
           {"noise_scale", cfg.noise_scale},
           {"bias_dims", cfg.bias_dims},
           {"bias_strength", cfg.bias_strength},
           {"bias_flip_at_test", cfg.bias_flip_at_test},
           {"bias_modality", cfg.bias_modality == BiasModality::kText ? "text" : "image"},
           {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, SyntheticConfig& cfg) {
  auto read = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception&) {
      throw ConfigError(std::string(key) + ": wrong type");
    }
  };
  read("n_train", cfg.n_train);
  read("n_val", cfg.n_val);
  read("n_test", cfg.n_test);
  read("d_t", cfg.d_t);
  read("d_i", cfg.d_i);
  read("class_priors", cfg.class_priors);
  read("signal_scale", cfg.signal_scale);
  read("noise_scale", cfg.noise_scale);
  read("bias_dims", cfg.bias_dims);
  read("bias_strength", cfg.bias_strength);
  read("bias_flip_at_test", cfg.bias_flip_at_test);
  read("seed", cfg.seed);
  if (j.contains("bias_modality")) {
    std::string m;
    read("bias_modality", m);
    if (m == "text") {
      cfg.bias_modality = BiasModality::kText;
    } else if (m == "image") {
      cfg.bias_modality = BiasModality::kImage;
    } else {
      throw ConfigError("bias_modality: expected text|image");
    }
  }
}

namespace {

Vec unit_gaussian(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

struct Generator {
  const SyntheticConfig& cfg;
  std::mt19937_64 rng;
  std::vector<Vec> clean_prototypes;   // prototypes of the unbiased modality
  std::vector<Vec> biased_prototypes;  // weak-signal prototypes of the biased modality
  std::size_t k;

  explicit Generator(const SyntheticConfig& c) : cfg(c), rng(c.seed), k(c.class_priors.size()) {
    const bool text_biased = cfg.bias_modality == BiasModality::kText;
    const std::size_t clean_dim = text_biased ? cfg.d_i : cfg.d_t;
    const std::size_t biased_dim = (text_biased ? cfg.d_t : cfg.d_i) - cfg.bias_dims;
    for (std::size_t y = 0; y < k; ++y) clean_prototypes.push_back(unit_gaussian(clean_dim, rng));
    for (std::size_t y = 0; y < k; ++y) biased_prototypes.push_back(unit_gaussian(biased_dim, rng));
  }

  // Spurious cue: equals y with probability strength, otherwise a uniformly
  // chosen other class.
  std::size_t cue(std::size_t y, double strength) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < strength) return y;
    std::uniform_int_distribution<std::size_t> other(0, k - 2);
    const std::size_t o = other(rng);
    return o >= y ? o + 1 : o;
  }

  Dataset make(std::size_t n, const std::string& name, bool decorrelate) {
    Dataset d;
    d.header = {cfg.d_t, cfg.d_i, {}};
    d.header.labels = k == 3 ? default_label_names() : std::vector<std::string>{};
    for (std::size_t y = 0; d.header.labels.size() < k; ++y) {
      d.header.labels.push_back("class" + std::to_string(y));
    }
    std::discrete_distribution<std::size_t> label_dist(cfg.class_priors.begin(),
                                                       cfg.class_priors.end());
    std::normal_distribution<double> noise(0.0, 1.0);
    const double uninformative = 1.0 / static_cast<double>(k);
    const bool text_biased = cfg.bias_modality == BiasModality::kText;
    for (std::size_t n_i = 0; n_i < n; ++n_i) {
      Sample s;
      s.id = name + "-" + std::to_string(n_i);
      s.label = label_dist(rng);
      const Vec& clean_proto = clean_prototypes[s.label];
      Vec clean(clean_proto.size());
      for (std::size_t j = 0; j < clean.size(); ++j) {
        clean[j] = cfg.signal_scale * clean_proto[j] + cfg.noise_scale * noise(rng);
      }
      const Vec& weak_proto = biased_prototypes[s.label];
      Vec biased(weak_proto.size() + cfg.bias_dims, 0.0);
      for (std::size_t j = 0; j < weak_proto.size(); ++j) {
        biased[j] = cfg.signal_scale * kBiasedModalitySignal * weak_proto[j] +
                    cfg.noise_scale * noise(rng);
      }
      const std::size_t word = cue(s.label, decorrelate ? uninformative : cfg.bias_strength);
      biased[weak_proto.size() + word % cfg.bias_dims] = 1.0;
      if (text_biased) {
        s.text = std::move(biased);
        s.image = std::move(clean);
      } else {
        s.text = std::move(clean);
        s.image = std::move(biased);
      }
      d.samples.push_back(std::move(s));
    }
    return d;
  }
};

}  // namespace

SyntheticSplits gen_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  json j = cfg;
  const std::string digest = sha256_hex(j.dump());
  Generator g(cfg);
  SyntheticSplits out;
  out.train = g.make(cfg.n_train, "train", false);
  out.val = g.make(cfg.n_val, "val", false);
  out.test = g.make(cfg.n_test, "test", cfg.bias_flip_at_test);
  out.train.provenance = {"synthetic:train", digest};
  out.val.provenance = {"synthetic:val", digest};
  out.test.provenance = {"synthetic:test", digest};
  return out;
}

std::vector<Dataset> split(const Dataset& d, std::span<const double> fractions,
                           std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split: no fractions given");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split: fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> members(fractions.size());
  for (std::size_t c = 0; c < d.header.num_classes(); ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.samples[i].label == c) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const double n = static_cast<double>(idx.size());
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (std::size_t s = 0; s < fractions.size(); ++s) {
      cumulative += fractions[s];
      const std::size_t end =
          s + 1 == fractions.size()
              ? idx.size()
              : std::min(idx.size(), static_cast<std::size_t>(std::llround(cumulative * n)));
      members[s].insert(members[s].end(), idx.begin() + static_cast<std::ptrdiff_t>(begin),
                        idx.begin() + static_cast<std::ptrdiff_t>(std::max(begin, end)));
      begin = std::max(begin, end);
    }
  }
  std::vector<Dataset> out;
  for (std::size_t s = 0; s < fractions.size(); ++s) {
    std::sort(members[s].begin(), members[s].end());
    Dataset part;
    part.header = d.header;
    part.provenance = {d.provenance.source + "#split" + std::to_string(s), d.provenance.digest};
    for (std::size_t i : members[s]) part.samples.push_back(d.samples[i]);
    out.push_back(std::move(part));
  }
  return out;
}

}  // namespace cfmsa
