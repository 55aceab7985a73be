#include "cfmsa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cfmsa/error.hpp"
#include "cfmsa/eval.hpp"

namespace cfmsa {

using nlohmann::json;

void TrainConfig::validate(std::size_t num_classes) const {
  if (!(lr_main > 0.0) || !std::isfinite(lr_main)) throw ConfigError("lr_main: must be > 0");
  if (!(lr_c > 0.0) || !std::isfinite(lr_c)) throw ConfigError("lr_c: must be > 0");
  if (epochs < 1) throw ConfigError("epochs: must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (class_weights.size() != num_classes) {
    throw ConfigError("class_weights: expected " + std::to_string(num_classes) + " entries");
  }
  for (double w : class_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("class_weights: entries must be > 0");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay: must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1: must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2: must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps: must be > 0");
}

void to_json(json& j, const TrainConfig& cfg) {
  j = json{{"lr_main", cfg.lr_main},
           {"lr_c", cfg.lr_c},
           {"epochs", cfg.epochs},
           {"batch_size", cfg.batch_size},
           {"seed", cfg.seed},
           {"class_weights", cfg.class_weights},
           {"c_mode", to_string(cfg.c_mode)},
           {"hidden_dim", cfg.hidden_dim},
           {"weight_decay", cfg.weight_decay},
           {"adam_beta1", cfg.adam_beta1},
           {"adam_beta2", cfg.adam_beta2},
           {"adam_eps", cfg.adam_eps},
           {"update_main", cfg.update_main},
           {"update_c", cfg.update_c}};
}

void from_json(const json& j, TrainConfig& cfg) {
  auto read = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception&) {
      throw ConfigError(std::string(key) + ": wrong type");
    }
  };
  read("lr_main", cfg.lr_main);
  read("lr_c", cfg.lr_c);
  read("epochs", cfg.epochs);
  read("batch_size", cfg.batch_size);
  read("seed", cfg.seed);
  read("class_weights", cfg.class_weights);
  read("hidden_dim", cfg.hidden_dim);
  read("weight_decay", cfg.weight_decay);
  read("adam_beta1", cfg.adam_beta1);
  read("adam_beta2", cfg.adam_beta2);
  read("adam_eps", cfg.adam_eps);
  read("update_main", cfg.update_main);
  read("update_c", cfg.update_c);
  if (j.contains("c_mode")) {
    std::string m;
    read("c_mode", m);
    cfg.c_mode = parse_c_mode(m);
  }
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& h) {
  if (params.size() != grads.size()) throw DimensionMismatch("adam_step: grad size");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionMismatch("adam_step: state size");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(h.beta1, t);
  const double bias2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (h.weight_decay != 0.0) params[i] -= h.lr * h.weight_decay * params[i];
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    params[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
}

nlohmann::ordered_json epoch_to_json(const EpochRecord& rec) {
  nlohmann::ordered_json j;
  j["epoch"] = rec.epoch;
  const LossBreakdown& l = rec.train_mean;
  j["train_loss"] = {{"l_cls_joint", l.l_cls_joint}, {"l_cls_text", l.l_cls_text},
                     {"l_cls_image", l.l_cls_image}, {"l_kl1", l.l_kl1},
                     {"l_kl2", l.l_kl2},             {"l_ti", l.l_ti},
                     {"total", l.total}};
  nlohmann::ordered_json val = nlohmann::ordered_json::object();
  for (const auto& [mode, acc] : rec.val_accuracy) val[std::string(to_string(mode))] = acc;
  j["val_accuracy"] = val;
  return j;
}

namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& x) {
  acc.l_cls_joint += x.l_cls_joint;
  acc.l_cls_text += x.l_cls_text;
  acc.l_cls_image += x.l_cls_image;
  acc.l_kl1 += x.l_kl1;
  acc.l_kl2 += x.l_kl2;
  acc.l_ti += x.l_ti;
}

LossBreakdown mean_of(const LossBreakdown& sum, std::size_t n) {
  const double s = 1.0 / static_cast<double>(n);
  ClsTerms cls{sum.l_cls_joint * s, sum.l_cls_text * s, sum.l_cls_image * s};
  KlTerms kl{sum.l_kl1 * s, sum.l_kl2 * s};
  return total_loss(cls, kl, sum.l_ti * s);
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset* val_set) {
  if (train_set.empty()) throw InvalidInput("train: empty training set");
  config.validate(train_set.header.num_classes());
  const ModelDims dims{train_set.header.d_t, train_set.header.d_i, config.hidden_dim,
                       train_set.header.num_classes()};
  Vec freqs;
  if (config.c_mode == CMode::kPrior) freqs = class_stats(train_set).frequencies;
  return train_from(init_model(dims, config.c_mode, config.seed, freqs, train_set.header.labels),
                    config, train_set, val_set);
}

TrainResult train_from(ModelParams params, const TrainConfig& config, const Dataset& train_set,
                       const Dataset* val_set) {
  if (train_set.empty()) throw InvalidInput("train: empty training set");
  config.validate(train_set.header.num_classes());
  check_compatible(params, train_set.header);
  if (val_set && !val_set->empty()) check_compatible(params, val_set->header);

  const AdamHyper main_hyper{config.lr_main, config.adam_beta1, config.adam_beta2, config.adam_eps,
                             config.weight_decay};
  const AdamHyper c_hyper{config.lr_c, config.adam_beta1, config.adam_beta2, config.adam_eps,
                          config.weight_decay};
  AdamState text_state, image_state, joint_state, c_state;
  const bool step_c = config.update_c && params.c.learnable();

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  std::vector<ForwardPass> batch;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown sums;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      batch.clear();
      for (std::size_t b = start; b < end; ++b) {
        const Sample& s = train_set.samples[order[b]];
        batch.push_back(forward(params, s));
        accumulate(sums, sample_losses(batch.back(), s.label, config.class_weights));
      }
      // c group first (L_kl + L_ti), then the branch group (L_cls).
      if (step_c) {
        Vec grad(params.c.values().size(), 0.0);
        for (const ForwardPass& fp : batch) accumulate_c_grad(params, fp, scale, grad);
        adam_step(params.c.values(), grad, c_state, c_hyper);
      }
      if (config.update_main) {
        BranchGradients grads(params);
        for (std::size_t b = start; b < end; ++b) {
          accumulate_cls_grad(params, batch[b - start], train_set.samples[order[b]].label,
                              config.class_weights, scale, grads);
        }
        adam_step(params.text.values(), grads.text, text_state, main_hyper);
        adam_step(params.image.values(), grads.image, image_state, main_hyper);
        adam_step(params.joint.values(), grads.joint, joint_state, main_hyper);
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mean = mean_of(sums, train_set.size());
    if (val_set && !val_set->empty()) {
      const EvalReport r = evaluate(params, *val_set, kAllModes);
      for (const ModeMetrics& m : r.modes) rec.val_accuracy.emplace_back(m.mode, m.accuracy);
    }
    history.epochs.push_back(std::move(rec));
  }
  return {std::move(params), std::move(history)};
}

}  // namespace cfmsa
