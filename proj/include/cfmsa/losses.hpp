#pragma once

#include <span>
#include <string_view>

#include "cfmsa/counterfactual.hpp"
#include "cfmsa/numerics.hpp"

namespace cfmsa {

// Which parameter group a loss term is allowed to update.
enum class GradientRoute { kBranchParams, kCParams };

enum class LossTerm { kClsJoint, kClsText, kClsImage, kKl1, kKl2, kTi };

constexpr GradientRoute route_of(LossTerm t) {
  switch (t) {
    case LossTerm::kClsJoint:
    case LossTerm::kClsText:
    case LossTerm::kClsImage: return GradientRoute::kBranchParams;
    case LossTerm::kKl1:
    case LossTerm::kKl2:
    case LossTerm::kTi: return GradientRoute::kCParams;
  }
  return GradientRoute::kBranchParams;
}

std::string_view to_string(LossTerm t);

struct ClsTerms {
  double joint = 0.0;  // on fused_full
  double text = 0.0;   // on z_t
  double image = 0.0;  // on z_i
};

struct KlTerms {
  double kl1 = 0.0;  // target p(y|t,i,k) vs text-masked distribution
  double kl2 = 0.0;  // target p(y|t,i,k) vs image-masked distribution
};

struct LossBreakdown {
  double l_cls_joint = 0.0;
  double l_cls_text = 0.0;
  double l_cls_image = 0.0;
  double l_kl1 = 0.0;
  double l_kl2 = 0.0;
  double l_ti = 0.0;
  double total = 0.0;

  double value(LossTerm t) const;
};

// Weighted cross-entropy on fused_full, z_t and z_i.
ClsTerms l_cls(const ScoreBundle& b, ClassIndex label, std::span<const double> weights);

// Cross-entropies of the masked distributions against the detached full
// distribution, each scaled by 1/|Y|.
KlTerms l_kl(const ScoreBundle& b);

// Symmetric 1/|Y|-scaled KL between the text-masked and image-masked distributions.
double l_ti(const ScoreBundle& b);

LossBreakdown total_loss(const ClsTerms& cls, const KlTerms& kl, double ti);

// d L_cls / d branch logits. Only the selected terms contribute.
struct ClsLogitGrad {
  Vec z_t;
  Vec z_i;
  Vec z_k;
};

struct ClsSelection {
  bool joint = true;
  bool text = true;
  bool image = true;
};

ClsLogitGrad l_cls_grad(const ScoreBundle& b, ClassIndex label, std::span<const double> weights,
                        ClsSelection which = {});

// Gradients with respect to the expanded c slots. The full distribution is a
// constant target and the branch logits inside the masked scores are constants.
CGrad l_kl1_grad(const ScoreBundle& b);
CGrad l_kl2_grad(const ScoreBundle& b);
CGrad l_ti_grad(const ScoreBundle& b);
// d (L_kl1 + L_kl2 + L_ti) / d c
CGrad c_objective_grad(const ScoreBundle& b);

}  // namespace cfmsa
