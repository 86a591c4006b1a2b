#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tmnr/subjective_logic.hpp"
#include "tmnr/types.hpp"

namespace tmnr {

/// Weights of the regularizers in the per-sample objective.
struct LossWeights {
  double beta = 0.1;       ///< matrix constraints M_D + M_O
  double gamma = 0.1;      ///< inter-view consistency of the transition matrices
  int anneal_epochs = 50;  ///< KL weight ramps linearly from 0 to 1 over this many epochs
};

/// Linear ramp min(1, epoch / horizon); a non-positive horizon means "always 1".
double annealing_coefficient(int epoch, int horizon);

/// Index of the largest entry, lowest index on ties.
Index hard_label(const Eigen::Ref<const Vector>& y);

/// Generalized maximum-likelihood loss sum_c y_c (psi(S) - psi(alpha_c)).
double ace_loss(const Eigen::Ref<const Vector>& alpha, const Eigen::Ref<const Vector>& y);
Vector ace_loss_gradient(const Eigen::Ref<const Vector>& alpha, const Eigen::Ref<const Vector>& y);

/// KL[Dir(alpha_bar) || Dir(1)] where alpha_bar is alpha with the labelled
/// component replaced by 1.
double kl_regularizer(const Eigen::Ref<const Vector>& alpha, Index label);
Vector kl_regularizer_gradient(const Eigen::Ref<const Vector>& alpha, Index label);

/// ace_loss + annealing_coefficient(epoch) * kl_regularizer(alpha, hard_label(y)).
double view_loss(const Eigen::Ref<const Vector>& alpha, const Eigen::Ref<const Vector>& y, int epoch,
                 const LossWeights& weights);
Vector view_loss_gradient(const Eigen::Ref<const Vector>& alpha, const Eigen::Ref<const Vector>& y, int epoch,
                          const LossWeights& weights);

/// Per-class batch mean of the view uncertainty; empty optional for classes absent from the batch.
using ClassMeans = std::vector<std::optional<double>>;

/// Diagonal constraint: the labelled diagonal entry is pulled to 1 - u, the
/// others to 1 - (batch class mean of u). Absent classes contribute nothing.
double diag_constraint(const Eigen::Ref<const Matrix>& t, double uncertainty, Index label,
                       const ClassMeans& batch_mean_u);

struct DiagConstraintGradient {
  double uncertainty = 0;
  Vector diagonal;
};
DiagConstraintGradient diag_constraint_gradient(const Eigen::Ref<const Matrix>& t, double uncertainty, Index label,
                                                const ClassMeans& batch_mean_u);

/// sum_k s_k ||offdiag(T) - offdiag(T_k)||_F^2. Neighbor matrices are treated as constants.
double offdiag_constraint(const Eigen::Ref<const Matrix>& t, std::span<const Matrix> neighbors,
                          std::span<const double> similarity);
Matrix offdiag_constraint_gradient(const Eigen::Ref<const Matrix>& t, std::span<const Matrix> neighbors,
                                   std::span<const double> similarity);

/// (1/V) sum_v sum_cj |t^v_cj - mean_v t_cj|.
double consistency_loss(std::span<const Matrix> views);
/// Subgradient with sign(0) = 0.
std::vector<Matrix> consistency_loss_gradient(std::span<const Matrix> views);

/// (1/V) sum_v ||y - p^v||^2 over the clean per-view expected probabilities.
double mse_mixed_loss(std::span<const Vector> clean_probs, const Eigen::Ref<const Vector>& y);

/// Everything the per-sample objective reads for one training instance.
struct SampleInputs {
  std::vector<Vector> clean_evidence;                      ///< per view, length C
  std::vector<Matrix> transitions;                         ///< per view, C x C
  Vector label;                                            ///< soft label
  std::vector<std::vector<Matrix>> neighbor_transitions;   ///< per view, K matrices (may be empty)
  std::vector<std::vector<double>> neighbor_similarity;    ///< per view, K weights
  std::vector<ClassMeans> batch_mean_u;                    ///< per view; empty means "no batch statistics"
};

/// Clean and noisy quantities of one forward pass through the transition matrices.
struct ForwardResult {
  std::vector<Vector> clean_alpha;
  std::vector<Vector> clean_probs;
  std::vector<Vector> noisy_evidence;
  std::vector<Vector> noisy_alpha;
  std::vector<OpinionD> noisy_opinions;
  std::vector<OpinionD> partial_fusions;  ///< partial_fusions[k] = o_0 + ... + o_k
  OpinionD fused;
  Vector fused_alpha;
};

ForwardResult forward_noisy(std::span<const Vector> clean_evidence, std::span<const Matrix> transitions);

/// Fused clean opinion as a Dirichlet concentration (no transition matrices).
Vector fuse_clean(std::span<const Vector> clean_evidence);

struct LossBreakdown {
  double fused = 0;        ///< L(alpha~) of the fused noisy Dirichlet
  double views = 0;        ///< sum_v L(alpha~^v)
  double diagonal = 0;     ///< sum_v M_D (unweighted)
  double offdiagonal = 0;  ///< sum_v M_O (unweighted)
  double consistency = 0;  ///< L_con (unweighted)
  double mse = 0;          ///< L_mse (noisy-set objective only)
  double total = 0;
};

/// Gradient of a per-sample objective w.r.t. its differentiable inputs.
struct SampleGradient {
  std::vector<Vector> clean_evidence;
  std::vector<Matrix> transitions;
};

/// Objective for samples in the clean set:
/// L(alpha~) + sum_v [L(alpha~^v) + beta (M_D + M_O)] + gamma L_con.
LossBreakdown total_loss_clean(const SampleInputs& in, int epoch, const LossWeights& weights,
                               SampleGradient* grad = nullptr);

/// Objective for refined (noisy-set) samples: total_loss_clean + L_mse.
LossBreakdown total_loss_noisy(const SampleInputs& in, int epoch, const LossWeights& weights,
                               SampleGradient* grad = nullptr);

/// Warmup objective sum_v ace(alpha^v) + ace(fused clean alpha); gradient w.r.t. clean evidence.
double warmup_loss(std::span<const Vector> clean_evidence, const Eigen::Ref<const Vector>& y,
                   std::vector<Vector>* grad = nullptr);

}  // namespace tmnr
