#include "cfmsa/branches.hpp"

#include <cmath>
#include <random>
#include <string>

#include "cfmsa/error.hpp"

namespace cfmsa {

std::size_t BranchParams::parameter_count(std::size_t input_dim, std::size_t hidden_dim,
                                          std::size_t num_classes) {
  if (hidden_dim == 0) return num_classes * input_dim + num_classes;
  return hidden_dim * input_dim + hidden_dim + num_classes * hidden_dim + num_classes;
}

BranchParams::BranchParams(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes)
    : BranchParams(input_dim, hidden_dim, num_classes,
                   Vec(parameter_count(input_dim, hidden_dim, num_classes), 0.0)) {}

BranchParams::BranchParams(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                           Vec values)
    : input_dim_(input_dim),
      hidden_dim_(hidden_dim),
      num_classes_(num_classes),
      values_(std::move(values)) {
  if (input_dim_ == 0 || num_classes_ == 0) {
    throw InvalidInput("BranchParams: input_dim and num_classes must be positive");
  }
  const std::size_t expected = parameter_count(input_dim_, hidden_dim_, num_classes_);
  if (values_.size() != expected) {
    throw DimensionMismatch("BranchParams: expected " + std::to_string(expected) +
                            " values, got " + std::to_string(values_.size()));
  }
}

std::size_t BranchParams::output_offset() const {
  return hidden_dim_ == 0 ? 0 : hidden_dim_ * input_dim_ + hidden_dim_;
}

std::span<const double> BranchParams::hidden_weights() const {
  return std::span<const double>(values_).subspan(0, hidden_dim_ * input_dim_);
}

std::span<const double> BranchParams::hidden_bias() const {
  return std::span<const double>(values_).subspan(hidden_dim_ * input_dim_, hidden_dim_);
}

std::span<const double> BranchParams::output_weights() const {
  const std::size_t fan_in = is_linear() ? input_dim_ : hidden_dim_;
  return std::span<const double>(values_).subspan(output_offset(), num_classes_ * fan_in);
}

std::span<const double> BranchParams::output_bias() const {
  const std::size_t fan_in = is_linear() ? input_dim_ : hidden_dim_;
  return std::span<const double>(values_).subspan(output_offset() + num_classes_ * fan_in,
                                                  num_classes_);
}

std::span<double> BranchParams::output_weights() {
  const std::size_t fan_in = is_linear() ? input_dim_ : hidden_dim_;
  return std::span<double>(values_).subspan(output_offset(), num_classes_ * fan_in);
}

std::span<double> BranchParams::output_bias() {
  const std::size_t fan_in = is_linear() ? input_dim_ : hidden_dim_;
  return std::span<double>(values_).subspan(output_offset() + num_classes_ * fan_in, num_classes_);
}

BranchParams init_branch(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                         std::uint64_t seed) {
  BranchParams p(input_dim, hidden_dim, num_classes);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](std::span<double> w, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& x : w) x = dist(rng);
  };
  auto values = p.values();
  if (hidden_dim == 0) {
    fill(values.subspan(0, num_classes * input_dim), input_dim, num_classes);
  } else {
    fill(values.subspan(0, hidden_dim * input_dim), input_dim, hidden_dim);
    fill(p.output_weights(), hidden_dim, num_classes);
  }
  return p;
}

namespace {

// out = W x + b with W row-major [rows x cols].
Vec affine(std::span<const double> w, std::span<const double> b, std::span<const double> x) {
  Vec out(b.begin(), b.end());
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* row = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] += acc;
  }
  return out;
}

}  // namespace

BranchActivations forward(const BranchParams& params, std::span<const double> input) {
  if (input.size() != params.input_dim()) {
    throw DimensionMismatch("branch forward: feature dim " + std::to_string(input.size()) +
                            " does not match scorer input dim " +
                            std::to_string(params.input_dim()));
  }
  require_finite(input, "branch forward input");
  BranchActivations acts;
  acts.input.assign(input.begin(), input.end());
  if (params.is_linear()) {
    acts.logits = affine(params.output_weights(), params.output_bias(), input);
    return acts;
  }
  acts.hidden = affine(params.hidden_weights(), params.hidden_bias(), input);
  for (double& h : acts.hidden) h = h > 0.0 ? h : 0.0;
  acts.logits = affine(params.output_weights(), params.output_bias(), acts.hidden);
  return acts;
}

Vec score(const BranchParams& params, std::span<const double> input) {
  return forward(params, input).logits;
}

void backward(const BranchParams& params, const BranchActivations& acts,
              std::span<const double> grad_logits, std::span<double> grad) {
  if (grad.size() != params.values().size()) throw DimensionMismatch("branch backward: grad size");
  if (grad_logits.size() != params.num_classes()) {
    throw DimensionMismatch("branch backward: logit grad size");
  }
  const std::size_t k = params.num_classes();
  const std::span<const double> layer_in = params.is_linear() ? std::span<const double>(acts.input)
                                                              : std::span<const double>(acts.hidden);
  const std::size_t fan_in = layer_in.size();
  const std::size_t out_off = params.is_linear() ? 0 : params.hidden_dim() * params.input_dim() +
                                                           params.hidden_dim();
  double* gw2 = grad.data() + out_off;
  double* gb2 = gw2 + k * fan_in;
  for (std::size_t r = 0; r < k; ++r) {
    const double g = grad_logits[r];
    if (g == 0.0) continue;
    for (std::size_t c = 0; c < fan_in; ++c) gw2[r * fan_in + c] += g * layer_in[c];
    gb2[r] += g;
  }
  if (params.is_linear()) return;

  const std::size_t h = params.hidden_dim();
  const std::size_t d = params.input_dim();
  const auto w2 = params.output_weights();
  double* gw1 = grad.data();
  double* gb1 = gw1 + h * d;
  for (std::size_t j = 0; j < h; ++j) {
    if (acts.hidden[j] <= 0.0) continue;  // ReLU gate
    double gh = 0.0;
    for (std::size_t r = 0; r < k; ++r) gh += grad_logits[r] * w2[r * h + j];
    if (gh == 0.0) continue;
    for (std::size_t c = 0; c < d; ++c) gw1[j * d + c] += gh * acts.input[c];
    gb1[j] += gh;
  }
}

Vec concat(std::span<const double> a, std::span<const double> b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace cfmsa
