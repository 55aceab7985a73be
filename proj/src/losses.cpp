#include "cfmsa/losses.hpp"

#include <cmath>

#include "cfmsa/error.hpp"

namespace cfmsa {

std::string_view to_string(LossTerm t) {
  switch (t) {
    case LossTerm::kClsJoint: return "l_cls_joint";
    case LossTerm::kClsText: return "l_cls_text";
    case LossTerm::kClsImage: return "l_cls_image";
    case LossTerm::kKl1: return "l_kl1";
    case LossTerm::kKl2: return "l_kl2";
    case LossTerm::kTi: return "l_ti";
  }
  return "unknown";
}

double LossBreakdown::value(LossTerm t) const {
  switch (t) {
    case LossTerm::kClsJoint: return l_cls_joint;
    case LossTerm::kClsText: return l_cls_text;
    case LossTerm::kClsImage: return l_cls_image;
    case LossTerm::kKl1: return l_kl1;
    case LossTerm::kKl2: return l_kl2;
    case LossTerm::kTi: return l_ti;
  }
  return 0.0;
}

ClsTerms l_cls(const ScoreBundle& b, ClassIndex label, std::span<const double> weights) {
  return {cross_entropy(b.fused_full, label, weights), cross_entropy(b.z_t, label, weights),
          cross_entropy(b.z_i, label, weights)};
}

namespace {

double inv_classes(const ScoreBundle& b) { return 1.0 / static_cast<double>(b.fused_full.size()); }

// (1/|Y|) sum_y -p_y log q_y with q = softmax(fused).
double scaled_cross_entropy(const Vec& p, const Vec& fused) {
  const Vec log_q = log_softmax(fused);
  double acc = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) acc -= p[y] * log_q[y];
  return acc / static_cast<double>(p.size());
}

// d log sigmoid(s) / ds expressed through f = log sigmoid(s): 1 - sigmoid(s) = -expm1(f).
Vec through_log_sigmoid(const Vec& grad_fused, const Vec& fused) {
  Vec out(grad_fused.size());
  for (std::size_t y = 0; y < out.size(); ++y) out[y] = grad_fused[y] * -std::expm1(fused[y]);
  return out;
}

void add_into(Vec& dst, const Vec& src) {
  for (std::size_t y = 0; y < dst.size(); ++y) dst[y] += src[y];
}

// Gradient of (1/|Y|) sum -p log softmax(fused) with respect to the sum that
// feeds the fused score.
Vec masked_ce_grad(const Vec& p, const Vec& fused) {
  const Vec q = softmax(fused);
  const double scale = 1.0 / static_cast<double>(p.size());
  Vec g(q.size());
  for (std::size_t y = 0; y < g.size(); ++y) g[y] = scale * (q[y] - p[y]);
  return through_log_sigmoid(g, fused);
}

}  // namespace

KlTerms l_kl(const ScoreBundle& b) {
  const Vec p = softmax(b.fused_full);
  return {scaled_cross_entropy(p, b.fused_text_masked), scaled_cross_entropy(p, b.fused_image_masked)};
}

double l_ti(const ScoreBundle& b) {
  const Vec p = softmax(b.fused_text_masked);
  const Vec q = softmax(b.fused_image_masked);
  return kl_mean(p, q) + kl_mean(q, p);
}

LossBreakdown total_loss(const ClsTerms& cls, const KlTerms& kl, double ti) {
  LossBreakdown out;
  out.l_cls_joint = cls.joint;
  out.l_cls_text = cls.text;
  out.l_cls_image = cls.image;
  out.l_kl1 = kl.kl1;
  out.l_kl2 = kl.kl2;
  out.l_ti = ti;
  out.total = (cls.joint + cls.text + cls.image) + (kl.kl1 + kl.kl2) + ti;
  return out;
}

ClsLogitGrad l_cls_grad(const ScoreBundle& b, ClassIndex label, std::span<const double> weights,
                        ClsSelection which) {
  const std::size_t k = b.fused_full.size();
  ClsLogitGrad g{Vec(k, 0.0), Vec(k, 0.0), Vec(k, 0.0)};
  if (which.joint) {
    const Vec d_sum =
        through_log_sigmoid(cross_entropy_grad(b.fused_full, label, weights), b.fused_full);
    add_into(g.z_t, d_sum);
    add_into(g.z_i, d_sum);
    add_into(g.z_k, d_sum);
  }
  if (which.text) add_into(g.z_t, cross_entropy_grad(b.z_t, label, weights));
  if (which.image) add_into(g.z_i, cross_entropy_grad(b.z_i, label, weights));
  return g;
}

CGrad l_kl1_grad(const ScoreBundle& b) {
  CGrad g(b.fused_full.size());
  const Vec d_sum = masked_ce_grad(softmax(b.fused_full), b.fused_text_masked);
  g[CSlot::kImage] = d_sum;
  g[CSlot::kJointTextOnly] = d_sum;
  return g;
}

CGrad l_kl2_grad(const ScoreBundle& b) {
  CGrad g(b.fused_full.size());
  const Vec d_sum = masked_ce_grad(softmax(b.fused_full), b.fused_image_masked);
  g[CSlot::kText] = d_sum;
  g[CSlot::kJointImageOnly] = d_sum;
  return g;
}

CGrad l_ti_grad(const ScoreBundle& b) {
  const std::size_t k = b.fused_full.size();
  const Vec p = softmax(b.fused_text_masked);
  const Vec q = softmax(b.fused_image_masked);
  const Vec log_p = log_softmax(b.fused_text_masked);
  const Vec log_q = log_softmax(b.fused_image_masked);
  double kl_pq = 0.0, kl_qp = 0.0;
  for (std::size_t y = 0; y < k; ++y) {
    kl_pq += p[y] * (log_p[y] - log_q[y]);
    kl_qp += q[y] * (log_q[y] - log_p[y]);
  }
  // KL(P||Q) + KL(Q||P) differentiated through P = softmax(f_p) and Q = softmax(f_q):
  //   d/df_p = P (log P - log Q - KL(P||Q)) + P - Q, and symmetrically for f_q.
  const double scale = inv_classes(b);
  Vec d_fp(k), d_fq(k);
  for (std::size_t y = 0; y < k; ++y) {
    d_fp[y] = scale * (p[y] * (log_p[y] - log_q[y] - kl_pq) + p[y] - q[y]);
    d_fq[y] = scale * (q[y] * (log_q[y] - log_p[y] - kl_qp) + q[y] - p[y]);
  }
  const Vec d_sp = through_log_sigmoid(d_fp, b.fused_text_masked);
  const Vec d_sq = through_log_sigmoid(d_fq, b.fused_image_masked);
  CGrad g(k);
  g[CSlot::kImage] = d_sp;
  g[CSlot::kJointTextOnly] = d_sp;
  g[CSlot::kText] = d_sq;
  g[CSlot::kJointImageOnly] = d_sq;
  return g;
}

CGrad c_objective_grad(const ScoreBundle& b) {
  CGrad total(b.fused_full.size());
  for (const CGrad& part : {l_kl1_grad(b), l_kl2_grad(b), l_ti_grad(b)}) {
    for (std::size_t s = 0; s < 4; ++s) add_into(total.slots[s], part.slots[s]);
  }
  return total;
}

}  // namespace cfmsa
