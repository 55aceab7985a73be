#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cfmsa/numerics.hpp"

namespace cfmsa {

// Feed-forward scorer: input -> [ReLU hidden layer] -> num_classes logits.
// All weights live in one flat buffer so optimizers and checkpoints treat a
// branch as a single parameter vector. Layout (row-major):
//   hidden_dim > 0:  W1[hidden x input], b1[hidden], W2[classes x hidden], b2[classes]
//   hidden_dim == 0: W[classes x input], b[classes]
class BranchParams {
 public:
  BranchParams(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes);
  // Throws DimensionMismatch if values does not match the layout size.
  BranchParams(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes, Vec values);

  static std::size_t parameter_count(std::size_t input_dim, std::size_t hidden_dim,
                                     std::size_t num_classes);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  std::size_t num_classes() const { return num_classes_; }
  bool is_linear() const { return hidden_dim_ == 0; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  // Views into the flat buffer. For the linear layout the output layer is the only one.
  std::span<const double> hidden_weights() const;
  std::span<const double> hidden_bias() const;
  std::span<const double> output_weights() const;
  std::span<const double> output_bias() const;
  std::span<double> output_weights();
  std::span<double> output_bias();

  friend bool operator==(const BranchParams&, const BranchParams&) = default;

 private:
  std::size_t output_offset() const;

  std::size_t input_dim_;
  std::size_t hidden_dim_;
  std::size_t num_classes_;
  Vec values_;
};

// Glorot-uniform weights on [-a, a], a = sqrt(6 / (fan_in + fan_out)), zero biases.
BranchParams init_branch(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                         std::uint64_t seed);

// Intermediate values kept for the backward pass.
struct BranchActivations {
  Vec input;
  Vec hidden;  // post-ReLU; empty for the linear layout
  Vec logits;
};

BranchActivations forward(const BranchParams& params, std::span<const double> input);

// Plain forward pass for one feature vector.
Vec score(const BranchParams& params, std::span<const double> input);

// Accumulates d loss / d params into grad (same layout as params.values())
// given d loss / d logits.
void backward(const BranchParams& params, const BranchActivations& acts,
              std::span<const double> grad_logits, std::span<double> grad);

Vec concat(std::span<const double> a, std::span<const double> b);

}  // namespace cfmsa
