#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace cfmsa {

// Dense real vector. Logit and probability vectors both use this storage;
// the functions below document which one they expect.
using Vec = std::vector<double>;
using ClassIndex = std::size_t;

// Throws InvalidInput if any entry is NaN or infinite.
void require_finite(std::span<const double> v, const char* what);

// Max-subtracted softmax. Output sums to 1 within 1e-12.
Vec softmax(std::span<const double> logits);

// log softmax computed as v - logsumexp(v).
Vec log_softmax(std::span<const double> logits);

double log_sigmoid(double x);
Vec log_sigmoid(std::span<const double> v);

// 1/|Y| scaled Kullback-Leibler divergence sum_y p_y log(p_y / q_y) / |Y|.
double kl_mean(std::span<const double> p, std::span<const double> q);

// -weights[label] * log softmax(input)[label]
double cross_entropy(std::span<const double> input, ClassIndex label,
                     std::span<const double> weights);

// d cross_entropy / d input = weights[label] * (softmax(input) - onehot(label))
Vec cross_entropy_grad(std::span<const double> input, ClassIndex label,
                       std::span<const double> weights);

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
Vec finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h = 1e-5);

// ||a - b|| / max(||a||, ||b||), zero when both vectors vanish.
double relative_error(std::span<const double> a, std::span<const double> b);

std::size_t argmax(std::span<const double> v);

}  // namespace cfmsa
