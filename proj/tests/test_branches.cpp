#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "cfmsa/branches.hpp"
#include "cfmsa/error.hpp"
#include "cfmsa/model.hpp"

using namespace cfmsa;

namespace {

Vec random_vec(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("init_branch is deterministic and bounded") {
  const BranchParams a = init_branch(10, 32, 3, 42);
  const BranchParams b = init_branch(10, 32, 3, 42);
  CHECK(a == b);
  CHECK_FALSE(a == init_branch(10, 32, 3, 43));

  const double a1 = std::sqrt(6.0 / (10 + 32));
  const double a2 = std::sqrt(6.0 / (32 + 3));
  for (double w : a.hidden_weights()) CHECK(std::abs(w) <= a1);
  for (double w : a.output_weights()) CHECK(std::abs(w) <= a2);
  for (double x : a.hidden_bias()) CHECK(x == 0.0);
  for (double x : a.output_bias()) CHECK(x == 0.0);
}

TEST_CASE("hidden_dim 0 gives a single linear layer") {
  const BranchParams p = init_branch(7, 0, 3, 1);
  CHECK(p.is_linear());
  CHECK(p.values().size() == 7 * 3 + 3);
  CHECK(p.output_weights().size() == 21);
  const double a = std::sqrt(6.0 / (7 + 3));
  for (double w : p.output_weights()) CHECK(std::abs(w) <= a);
}

TEST_CASE("zero parameters give zero logits") {
  const BranchParams p(5, 4, 3);
  std::mt19937_64 rng(1);
  for (double x : score(p, random_vec(rng, 5))) CHECK(x == 0.0);
}

TEST_CASE("linear scorer on a one-hot feature returns that weight column") {
  BranchParams p = init_branch(4, 0, 3, 9);
  const Vec onehot{0.0, 0.0, 1.0, 0.0};
  const Vec logits = score(p, onehot);
  const auto w = p.output_weights();
  for (std::size_t r = 0; r < 3; ++r) CHECK(logits[r] == w[r * 4 + 2]);
}

TEST_CASE("dimension mismatch is rejected") {
  const BranchParams p = init_branch(4, 8, 3, 0);
  CHECK_THROWS_AS(score(p, Vec(5, 0.0)), DimensionMismatch);
  CHECK_THROWS_AS(BranchParams(4, 8, 3, Vec(3, 0.0)), DimensionMismatch);
}

TEST_CASE("branch backward matches finite differences for every logit") {
  std::mt19937_64 rng(2024);
  for (std::size_t hidden : {std::size_t{0}, std::size_t{6}}) {
    for (int point = 0; point < 20; ++point) {
      BranchParams p(5, hidden, 3, random_vec(rng, BranchParams::parameter_count(5, hidden, 3)));
      const Vec x = random_vec(rng, 5);
      const BranchActivations acts = forward(p, x);
      for (std::size_t r = 0; r < 3; ++r) {
        Vec onehot(3, 0.0);
        onehot[r] = 1.0;
        Vec analytic(p.values().size(), 0.0);
        backward(p, acts, onehot, analytic);
        const Vec start(p.values().begin(), p.values().end());
        BranchParams probe = p;
        const Vec numeric = finite_diff_grad(
            [&](std::span<const double> v) {
              std::copy(v.begin(), v.end(), probe.values().begin());
              return score(probe, x)[r];
            },
            start);
        CHECK(relative_error(analytic, numeric) < 1e-5);
      }
    }
  }
}

TEST_CASE("joint scorer depends on both segments") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    BranchParams p(8, 16, 3, random_vec(rng, BranchParams::parameter_count(8, 16, 3)));
    const Vec t = random_vec(rng, 4), i = random_vec(rng, 4);
    const Vec base = score(p, concat(t, i));
    Vec t2 = t, i2 = i;
    t2[0] += 0.1;
    i2[0] += 0.1;
    CHECK(score(p, concat(t2, i)) != base);
    CHECK(score(p, concat(t, i2)) != base);
  }
}

TEST_CASE("linear scorer is scale exact") {
  std::mt19937_64 rng(5);
  BranchParams p(6, 0, 3, random_vec(rng, BranchParams::parameter_count(6, 0, 3)));
  const Vec t = random_vec(rng, 6);
  const Vec bias(p.output_bias().begin(), p.output_bias().end());
  for (double lambda : {-2.0, 0.0, 0.5, 3.0}) {
    Vec scaled_t = t;
    for (double& x : scaled_t) x *= lambda;
    const Vec lhs = score(p, scaled_t);
    const Vec base = score(p, t);
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(lhs[r] == doctest::Approx(lambda * base[r] + (1.0 - lambda) * bias[r]).epsilon(1e-12));
    }
  }
}

TEST_CASE("checkpoint round trip is bit faithful") {
  std::mt19937_64 rng(8);
  ModelParams p = init_model({5, 4, 6, 3}, CMode::kNonUniform, 123);
  for (double& x : p.c.values()) x = std::normal_distribution<double>(0.0, 1.0)(rng);
  for (double& x : p.text.values()) x += 1e-17 * std::normal_distribution<double>(0.0, 1.0)(rng);
  const std::string text = serialize_checkpoint(p);
  const ModelParams q = checkpoint_from_json(nlohmann::json::parse(text));
  CHECK(q.text == p.text);
  CHECK(q.image == p.image);
  CHECK(q.joint == p.joint);
  CHECK(q.c.mode() == p.c.mode());
  CHECK(std::equal(q.c.values().begin(), q.c.values().end(), p.c.values().begin()));
  CHECK(q.labels == p.labels);
  CHECK(serialize_checkpoint(q) == text);
}

TEST_CASE("checkpoint loader rejects inconsistent shapes") {
  const ModelParams p = init_model({5, 4, 6, 3}, CMode::kUniform, 1);
  nlohmann::json j = nlohmann::json::parse(serialize_checkpoint(p));
  j["dims"]["d_t"] = 6;
  CHECK_THROWS_AS(checkpoint_from_json(j), ParseError);
  j = nlohmann::json::parse(serialize_checkpoint(p));
  j["c"]["values"] = Vec{0.0, 1.0};
  CHECK_THROWS(checkpoint_from_json(j));
}
