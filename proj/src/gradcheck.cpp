#include "cfmsa/gradcheck.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "cfmsa/losses.hpp"
#include "cfmsa/numerics.hpp"

namespace cfmsa {

namespace {

enum class Group { kText, kImage, kJoint, kC };

const char* group_name(Group g, CMode mode) {
  switch (g) {
    case Group::kText: return "text-branch";
    case Group::kImage: return "image-branch";
    case Group::kJoint: return "joint-branch";
    case Group::kC: return mode == CMode::kUniform ? "c (uniform)" : "c (nonuniform)";
  }
  return "?";
}

std::span<double> group_values(ModelParams& p, Group g) {
  switch (g) {
    case Group::kText: return p.text.values();
    case Group::kImage: return p.image.values();
    case Group::kJoint: return p.joint.values();
    case Group::kC: return p.c.values();
  }
  return {};
}

struct Point {
  ModelParams params;
  Sample sample;
  Vec weights;
};

Point random_point(const GradCheckOptions& opt, CMode mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> weight(0.5, 3.0);
  std::uniform_int_distribution<std::size_t> label(0, opt.dims.num_classes - 1);
  std::vector<std::string> labels;
  for (std::size_t c = 0; c < opt.dims.num_classes; ++c) labels.push_back("c" + std::to_string(c));
  Point pt{init_model(opt.dims, mode, seed, {}, labels), {}, {}};
  for (Group g : {Group::kText, Group::kImage, Group::kJoint, Group::kC}) {
    for (double& x : group_values(pt.params, g)) x = 0.7 * normal(rng);
  }
  pt.sample.id = "gradcheck";
  pt.sample.text = Vec(opt.dims.d_t);
  pt.sample.image = Vec(opt.dims.d_i);
  for (double& x : *pt.sample.text) x = normal(rng);
  for (double& x : *pt.sample.image) x = normal(rng);
  pt.sample.label = label(rng);
  pt.weights.resize(opt.dims.num_classes);
  for (double& w : pt.weights) w = weight(rng);
  return pt;
}

struct Check {
  LossTerm term;
  Group group;
};

double term_value(const ModelParams& p, const Sample& s, const Vec& w, LossTerm term) {
  const ScoreBundle b = forward(p, s).bundle;
  switch (term) {
    case LossTerm::kClsJoint: return l_cls(b, s.label, w).joint;
    case LossTerm::kClsText: return l_cls(b, s.label, w).text;
    case LossTerm::kClsImage: return l_cls(b, s.label, w).image;
    case LossTerm::kKl1: return l_kl(b).kl1;
    case LossTerm::kKl2: return l_kl(b).kl2;
    case LossTerm::kTi: return l_ti(b);
  }
  return 0.0;
}

Vec analytic(const Point& pt, LossTerm term, Group group) {
  const ForwardPass fp = forward(pt.params, pt.sample);
  if (group == Group::kC) {
    const CGrad g = [&] {
      switch (term) {
        case LossTerm::kKl1: return l_kl1_grad(fp.bundle);
        case LossTerm::kKl2: return l_kl2_grad(fp.bundle);
        default: return l_ti_grad(fp.bundle);
      }
    }();
    return pt.params.c.reduce_grad(g);
  }
  ClsSelection which{term == LossTerm::kClsJoint, term == LossTerm::kClsText,
                     term == LossTerm::kClsImage};
  BranchGradients grads(pt.params);
  accumulate_cls_grad(pt.params, fp, pt.sample.label, pt.weights, 1.0, grads, which);
  switch (group) {
    case Group::kText: return grads.text;
    case Group::kImage: return grads.image;
    default: return grads.joint;
  }
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& opt) {
  // Only families with a structurally non-zero gradient; the routing tests
  // cover the zero blocks.
  const std::vector<Check> checks = {
      {LossTerm::kClsJoint, Group::kText}, {LossTerm::kClsJoint, Group::kImage},
      {LossTerm::kClsJoint, Group::kJoint}, {LossTerm::kClsText, Group::kText},
      {LossTerm::kClsImage, Group::kImage}, {LossTerm::kKl1, Group::kC},
      {LossTerm::kKl2, Group::kC},          {LossTerm::kTi, Group::kC},
  };
  std::vector<GradCheckResult> results;
  for (CMode mode : {CMode::kNonUniform, CMode::kUniform}) {
    for (const Check& chk : checks) {
      if (mode == CMode::kUniform && chk.group != Group::kC) continue;
      GradCheckResult r;
      r.loss = std::string(to_string(chk.term));
      r.group = group_name(chk.group, mode);
      for (std::size_t i = 0; i < opt.points; ++i) {
        const Point pt = random_point(opt, mode, opt.seed * 1000003ULL + i);
        const Vec a = analytic(pt, chk.term, chk.group);
        ModelParams probe = pt.params;
        const std::span<const double> x0 = group_values(probe, chk.group);
        const Vec start(x0.begin(), x0.end());
        const Vec numeric = finite_diff_grad(
            [&](std::span<const double> x) {
              std::copy(x.begin(), x.end(), group_values(probe, chk.group).begin());
              return term_value(probe, pt.sample, pt.weights, chk.term);
            },
            start, opt.step);
        r.max_relative_error = std::max(r.max_relative_error, relative_error(a, numeric));
        ++r.points;
      }
      r.passed = r.max_relative_error < opt.tolerance;
      results.push_back(std::move(r));
    }
  }
  return results;
}

}  // namespace cfmsa
