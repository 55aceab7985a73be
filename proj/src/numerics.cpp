#include "cfmsa/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cfmsa/error.hpp"

namespace cfmsa {

void require_finite(std::span<const double> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw InvalidInput(std::string(what) + ": non-finite entry at index " + std::to_string(i));
    }
  }
}

namespace {

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

void require_nonempty(std::span<const double> v, const char* what) {
  if (v.empty()) throw InvalidInput(std::string(what) + ": empty vector");
}

}  // namespace

Vec softmax(std::span<const double> logits) {
  require_nonempty(logits, "softmax");
  require_finite(logits, "softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

Vec log_softmax(std::span<const double> logits) {
  require_nonempty(logits, "log_softmax");
  require_finite(logits, "log_softmax");
  const double lse = log_sum_exp(logits);
  Vec out(logits.begin(), logits.end());
  for (double& x : out) x -= lse;
  return out;
}

double log_sigmoid(double x) {
  if (!std::isfinite(x)) throw InvalidInput("log_sigmoid: non-finite input");
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

Vec log_sigmoid(std::span<const double> v) {
  Vec out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return log_sigmoid(x); });
  return out;
}

double kl_mean(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionMismatch("kl_mean: length mismatch");
  require_nonempty(p, "kl_mean");
  double acc = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (p[y] == 0.0) continue;
    if (q[y] == 0.0) throw InvalidInput("kl_mean: divergence, q has a zero entry where p > 0");
    acc += p[y] * std::log(p[y] / q[y]);
  }
  return acc / static_cast<double>(p.size());
}

namespace {

void check_ce_args(std::span<const double> input, ClassIndex label,
                   std::span<const double> weights) {
  if (label >= input.size()) {
    throw InvalidInput("cross_entropy: label " + std::to_string(label) + " out of range");
  }
  if (weights.size() != input.size()) throw DimensionMismatch("cross_entropy: weights length");
}

}  // namespace

double cross_entropy(std::span<const double> input, ClassIndex label,
                     std::span<const double> weights) {
  check_ce_args(input, label, weights);
  return -weights[label] * log_softmax(input)[label];
}

Vec cross_entropy_grad(std::span<const double> input, ClassIndex label,
                       std::span<const double> weights) {
  check_ce_args(input, label, weights);
  Vec g = softmax(input);
  g[label] -= 1.0;
  for (double& x : g) x *= weights[label];
  return g;
}

Vec finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw InvalidInput("finite_diff_grad: step must be positive");
  Vec probe(x.begin(), x.end());
  Vec grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(probe);
    probe[i] = saved - h;
    const double down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw InvalidInput("finite_diff_grad: non-finite function value at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

std::size_t argmax(std::span<const double> v) {
  require_nonempty(v, "argmax");
  // std::max_element returns the first maximum, so ties go to the lowest index.
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace cfmsa
