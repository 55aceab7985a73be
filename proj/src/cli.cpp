#include "cfmsa/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "cfmsa/error.hpp"
#include "cfmsa/eval.hpp"
#include "cfmsa/model.hpp"

namespace cfmsa {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

ordered_json run_config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["command"] = cfg.command;
  j["data"] = cfg.data;
  j["out"] = cfg.out;
  j["checkpoint"] = cfg.checkpoint;
  j["id"] = cfg.record_id;
  std::vector<std::string> modes;
  for (InferenceMode m : cfg.modes) modes.emplace_back(to_string(m));
  j["modes"] = modes;
  j["no_timestamp"] = !cfg.timestamp;
  j["train"] = ordered_json(json(cfg.train));
  j["synthetic"] = ordered_json(json(cfg.synthetic));
  j["gradcheck"] = {{"points", cfg.gradcheck.points},
                    {"seed", cfg.gradcheck.seed},
                    {"tolerance", cfg.gradcheck.tolerance},
                    {"step", cfg.gradcheck.step}};
  return j;
}

namespace {

// Flag values; unset optionals leave the config-file value in place.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> data;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint;
  std::optional<std::string> record_id;
  std::optional<std::string> modes;
  std::optional<std::string> c_mode;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr_main;
  std::optional<double> lr_c;
  std::optional<double> bias_strength;
  std::optional<std::size_t> points;
  bool no_timestamp = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run configuration");
  sub->add_option("--seed", f.seed, "Seed for every random stream");
  sub->add_option("--data", f.data, "Feature JSONL file or directory");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_flag("--no-timestamp", f.no_timestamp, "Omit timestamps from outputs");
}

void add_training(CLI::App* sub, Flags& f) {
  sub->add_option("--c-mode", f.c_mode, "random|prior|uniform|nonuniform");
  sub->add_option("--epochs", f.epochs);
  sub->add_option("--batch-size", f.batch_size);
  sub->add_option("--lr-main", f.lr_main);
  sub->add_option("--lr-c", f.lr_c);
}

template <typename T>
void read_key(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(field);
  } catch (const json::exception&) {
    throw ConfigError(std::string(key) + ": wrong type");
  }
}

void apply_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.train.seed = seed;
  cfg.synthetic.seed = seed;
  cfg.gradcheck.seed = seed;
}

RunConfig resolve(const std::string& command, const Flags& f) {
  RunConfig cfg;
  cfg.command = command;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("config: cannot open " + f.config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    if (j.contains("train")) from_json(j.at("train"), cfg.train);
    if (j.contains("synthetic")) from_json(j.at("synthetic"), cfg.synthetic);
    if (j.contains("gradcheck")) {
      const json& g = j.at("gradcheck");
      read_key(g, "points", cfg.gradcheck.points);
      read_key(g, "tolerance", cfg.gradcheck.tolerance);
      read_key(g, "step", cfg.gradcheck.step);
    }
    if (j.contains("seed")) {
      std::uint64_t seed = 0;
      read_key(j, "seed", seed);
      apply_seed(cfg, seed);
    }
    if (j.contains("data")) {
      if (j.at("data").is_string()) {
        cfg.data = {j.at("data").get<std::string>()};
      } else {
        read_key(j, "data", cfg.data);
      }
    }
    read_key(j, "out", cfg.out);
    read_key(j, "checkpoint", cfg.checkpoint);
    read_key(j, "id", cfg.record_id);
    if (j.contains("modes")) {
      std::string modes;
      read_key(j, "modes", modes);
      cfg.modes = parse_inference_modes(modes);
    }
    if (j.contains("no_timestamp")) {
      bool no_ts = false;
      read_key(j, "no_timestamp", no_ts);
      cfg.timestamp = !no_ts;
    }
  }
  if (f.seed) apply_seed(cfg, *f.seed);
  if (!f.data.empty()) cfg.data = f.data;
  if (f.out) cfg.out = *f.out;
  if (f.checkpoint) cfg.checkpoint = *f.checkpoint;
  if (f.record_id) cfg.record_id = *f.record_id;
  if (f.modes) cfg.modes = parse_inference_modes(*f.modes);
  if (f.c_mode) cfg.train.c_mode = parse_c_mode(*f.c_mode);
  if (f.epochs) cfg.train.epochs = *f.epochs;
  if (f.batch_size) cfg.train.batch_size = *f.batch_size;
  if (f.lr_main) cfg.train.lr_main = *f.lr_main;
  if (f.lr_c) cfg.train.lr_c = *f.lr_c;
  if (f.bias_strength) cfg.synthetic.bias_strength = *f.bias_strength;
  if (f.points) cfg.gradcheck.points = *f.points;
  if (f.no_timestamp) cfg.timestamp = false;
  return cfg;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

// Every artifact starts with the resolved run configuration.
ordered_json provenance_block(const RunConfig& cfg) {
  ordered_json j;
  j["run_config"] = run_config_to_json(cfg);
  if (cfg.timestamp) j["timestamp"] = utc_timestamp();
  return j;
}

fs::path require_out(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("out: an output directory is required (--out)");
  fs::create_directories(cfg.out);
  return cfg.out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

// A directory resolves to <dir>/<stem>.jsonl, a file to itself.
fs::path resolve_data(const std::string& path, const char* stem, bool required = true) {
  const fs::path p(path);
  if (fs::is_directory(p)) {
    const fs::path f = p / (std::string(stem) + ".jsonl");
    if (fs::exists(f)) return f;
    if (required) throw ConfigError("data: " + f.string() + " not found");
    return {};
  }
  if (!fs::exists(p)) throw ConfigError("data: " + path + " not found");
  return p;
}

const std::string& first_data(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("data: a data path is required (--data)");
  return cfg.data.front();
}

fs::path checkpoint_path(const RunConfig& cfg) {
  fs::path p = cfg.checkpoint;
  if (p.empty() && !cfg.out.empty()) p = fs::path(cfg.out) / "checkpoint.json";
  if (p.empty()) throw ConfigError("checkpoint: a checkpoint path is required (--checkpoint)");
  if (!fs::exists(p)) throw ConfigError("checkpoint: " + p.string() + " not found");
  return p;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  cfg.synthetic.validate();
  const fs::path dir = require_out(cfg);
  const SyntheticSplits splits = gen_synthetic(cfg.synthetic);
  save_features(splits.train, dir / "train.jsonl");
  save_features(splits.val, dir / "val.jsonl");
  save_features(splits.test, dir / "test.jsonl");
  write_text(dir / "synth_config.json", provenance_block(cfg).dump(1) + "\n");
  out << "wrote " << splits.train.size() << "/" << splits.val.size() << "/" << splits.test.size()
      << " train/val/test samples to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const std::string& data = first_data(cfg);
  const fs::path train_path = resolve_data(data, "train");
  const fs::path val_path = fs::is_directory(data) ? resolve_data(data, "val", false) : fs::path{};
  const fs::path dir = require_out(cfg);
  const Dataset train_set = load_features(train_path);
  std::optional<Dataset> val_set;
  if (!val_path.empty()) val_set = load_features(val_path);
  cfg.train.validate(train_set.header.num_classes());

  const TrainResult result = train(cfg.train, train_set, val_set ? &*val_set : nullptr);

  const ordered_json prov = provenance_block(cfg);
  ordered_json ckpt_meta = prov;
  ckpt_meta["train_data_digest"] = train_set.provenance.digest;
  save_checkpoint(result.params, dir / "checkpoint.json", &ckpt_meta);
  std::string log = prov.dump() + "\n";
  for (const EpochRecord& rec : result.history.epochs) {
    log += epoch_to_json(rec).dump() + "\n";
    out << "epoch " << rec.epoch << " loss " << std::setprecision(6) << rec.train_mean.total;
    for (const auto& [mode, acc] : rec.val_accuracy) out << " val_" << to_string(mode) << " " << acc;
    out << "\n";
  }
  write_text(dir / "history.jsonl", log);
  out << "checkpoint written to " << (dir / "checkpoint.json").string() << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  if (cfg.data.empty()) throw ConfigError("data: a data path is required (--data)");
  const ModelParams params = load_checkpoint(checkpoint_path(cfg));
  std::vector<NamedReport> reports;
  for (const std::string& data : cfg.data) {
    const fs::path p = resolve_data(data, "test");
    const Dataset d = load_features(p);
    reports.push_back({p.stem().string(), evaluate(params, d, cfg.modes)});
  }
  const std::string table = compare_report(reports);
  out << table;
  if (!cfg.out.empty()) {
    const fs::path dir = require_out(cfg);
    ordered_json j = provenance_block(cfg);
    ordered_json datasets = ordered_json::object();
    for (const NamedReport& r : reports) datasets[r.name] = report_to_json(r.report);
    j["datasets"] = datasets;
    write_text(dir / "report.json", j.dump(1) + "\n");
    write_text(dir / "report.txt", table);
  }
  return kExitOk;
}

Sample read_infer_record(const RunConfig& cfg, const ModelParams& params, std::istream& in) {
  DatasetHeader header{params.dims().d_t, params.dims().d_i, params.labels};
  if (!cfg.record_id.empty()) {
    const Dataset d = load_features(resolve_data(first_data(cfg), "test"));
    check_compatible(params, d.header);
    for (const Sample& s : d.samples) {
      if (s.id == cfg.record_id) return s;
    }
    throw ConfigError("id: no record '" + cfg.record_id + "' in " + first_data(cfg));
  }
  std::string line;
  while (line.empty() && std::getline(in, line)) {
  }
  if (line.empty()) throw ConfigError("infer: expected a JSON record on stdin or --id");
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("infer record: ") + e.what());
  }
  if (j.is_object() && !j.contains("label")) j["label"] = params.labels.front();
  if (j.is_object() && !j.contains("id")) j["id"] = "stdin";
  return parse_sample_line(j.dump(), header, 1);
}

int cmd_infer(const RunConfig& cfg, std::istream& in, std::ostream& out) {
  const ModelParams params = load_checkpoint(checkpoint_path(cfg));
  const Sample s = read_infer_record(cfg, params, in);
  const ScoreBundle b = forward(params, s).bundle;
  ordered_json j = provenance_block(cfg);
  j["id"] = s.id;
  ordered_json modes = ordered_json::object();
  const bool both = s.text && s.image;
  for (InferenceMode mode : cfg.modes) {
    ordered_json m;
    if (mode != InferenceMode::kBaseline && !both) {
      m["available"] = false;
      m["reason"] = s.text ? "image modality absent" : "text modality absent";
    } else {
      const Vec scores = decision_scores(b, mode);
      const ClassIndex c = argmax(scores);
      m["available"] = true;
      m["class"] = params.labels.at(c);
      m["class_index"] = c;
      m["scores"] = scores;
    }
    modes[std::string(to_string(mode))] = m;
  }
  j["modes"] = modes;
  out << j.dump(1) << "\n";
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  const std::vector<GradCheckResult> results = run_gradient_suite(cfg.gradcheck);
  bool ok = true;
  ordered_json rows = ordered_json::array();
  out << std::left << std::setw(14) << "loss" << std::setw(18) << "group" << std::setw(8)
      << "points" << std::setw(16) << "max rel err" << "status\n";
  for (const GradCheckResult& r : results) {
    ok = ok && r.passed;
    std::ostringstream err;
    err << std::scientific << std::setprecision(3) << r.max_relative_error;
    out << std::left << std::setw(14) << r.loss << std::setw(18) << r.group << std::setw(8)
        << r.points << std::setw(16) << err.str() << (r.passed ? "PASS" : "FAIL") << "\n";
    rows.push_back({{"loss", r.loss},
                    {"group", r.group},
                    {"points", r.points},
                    {"max_relative_error", r.max_relative_error},
                    {"passed", r.passed}});
  }
  if (!cfg.out.empty()) {
    ordered_json j = provenance_block(cfg);
    j["checks"] = rows;
    j["passed"] = ok;
    write_text(require_out(cfg) / "gradcheck.json", j.dump(1) + "\n");
  }
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(int argc, char** argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Counterfactual multimodal fusion: synthetic data, training, debiased inference"};
  app.require_subcommand(1);
  Flags flags;
  CLI::App* synth = app.add_subcommand("synth", "Generate synthetic biased feature files");
  add_common(synth, flags);
  synth->add_option("--bias-strength", flags.bias_strength, "Spurious cue agreement in [0, 1]");
  CLI::App* train_cmd = app.add_subcommand("train", "Train branch scorers and c");
  add_common(train_cmd, flags);
  add_training(train_cmd, flags);
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint in every inference mode");
  add_common(eval_cmd, flags);
  eval_cmd->add_option("--checkpoint", flags.checkpoint);
  eval_cmd->add_option("--modes", flags.modes, "te,tie-text,tie-image,tie-joint or all");
  CLI::App* infer_cmd = app.add_subcommand("infer", "Score one record (--id or stdin)");
  add_common(infer_cmd, flags);
  infer_cmd->add_option("--checkpoint", flags.checkpoint);
  infer_cmd->add_option("--modes", flags.modes);
  infer_cmd->add_option("--id", flags.record_id);
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
  add_common(grad_cmd, flags);
  grad_cmd->add_option("--points", flags.points);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App* chosen = app.get_subcommands().front();
    const RunConfig cfg = resolve(chosen->get_name(), flags);
    if (chosen == synth) return cmd_synth(cfg, out);
    if (chosen == train_cmd) return cmd_train(cfg, out);
    if (chosen == eval_cmd) return cmd_eval(cfg, out);
    if (chosen == infer_cmd) return cmd_infer(cfg, in, out);
    return cmd_gradcheck(cfg, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  std::vector<std::string> storage{"cfmsa"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : storage) argv.push_back(s.data());
  return run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err);
}

}  // namespace cfmsa
