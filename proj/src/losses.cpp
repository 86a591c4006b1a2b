#include "tmnr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tmnr/noise_correction.hpp"
#include "tmnr/special_functions.hpp"

namespace tmnr {

namespace {

void require_same_size(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

Vector kl_masked(const Eigen::Ref<const Vector>& alpha, Index label) {
  if (label < 0 || label >= alpha.size()) throw std::out_of_range("kl_regularizer: label out of range");
  Vector masked = alpha;
  masked(label) = 1.0;
  return masked;
}

std::vector<OpinionD> fold_partials(std::span<const OpinionD> opinions) {
  std::vector<OpinionD> partials;
  partials.reserve(opinions.size());
  partials.push_back(opinions.front());
  for (std::size_t v = 1; v < opinions.size(); ++v) partials.push_back(combine(partials.back(), opinions[v]));
  return partials;
}

// Back-propagates through the left fold o_0 + o_1 + ... + o_{V-1}.
std::vector<OpinionGradient<double>> fold_adjoint(std::span<const OpinionD> opinions,
                                                  std::span<const OpinionD> partials,
                                                  OpinionGradient<double> grad) {
  std::vector<OpinionGradient<double>> out(opinions.size());
  for (std::size_t v = opinions.size() - 1; v >= 1; --v) {
    auto [g_prev, g_view] = combine_adjoint(partials[v - 1], opinions[v], partials[v], grad);
    out[v] = std::move(g_view);
    grad = std::move(g_prev);
  }
  out[0] = std::move(grad);
  return out;
}

LossBreakdown evaluate_objective(const SampleInputs& in, int epoch, const LossWeights& weights, bool with_mse,
                                 SampleGradient* grad) {
  const std::size_t views = in.clean_evidence.size();
  if (views == 0 || in.transitions.size() != views) {
    throw std::invalid_argument("total_loss: need one transition matrix per view");
  }
  const Index label = hard_label(in.label);
  const bool has_neighbors = !in.neighbor_transitions.empty();
  const bool has_batch_means = !in.batch_mean_u.empty();

  const ForwardResult fwd = forward_noisy(in.clean_evidence, in.transitions);

  LossBreakdown out;
  out.fused = view_loss(fwd.fused_alpha, in.label, epoch, weights);
  for (std::size_t v = 0; v < views; ++v) {
    out.views += view_loss(fwd.noisy_alpha[v], in.label, epoch, weights);
    if (has_batch_means) {
      out.diagonal += diag_constraint(in.transitions[v], fwd.noisy_opinions[v].uncertainty, label, in.batch_mean_u[v]);
    }
    if (has_neighbors) {
      out.offdiagonal += offdiag_constraint(in.transitions[v], in.neighbor_transitions[v], in.neighbor_similarity[v]);
    }
  }
  out.consistency = consistency_loss(in.transitions);
  if (with_mse) out.mse = mse_mixed_loss(fwd.clean_probs, in.label);
  out.total = out.fused + out.views + weights.beta * (out.diagonal + out.offdiagonal) +
              weights.gamma * out.consistency + out.mse;

  if (grad == nullptr) return out;

  // Fused Dirichlet -> fused opinion -> per-view noisy opinions.
  const Vector g_fused_alpha = view_loss_gradient(fwd.fused_alpha, in.label, epoch, weights);
  const auto g_opinions = fold_adjoint(fwd.noisy_opinions, fwd.partial_fusions,
                                       opinion_to_dirichlet_adjoint(fwd.fused, g_fused_alpha));

  const std::vector<Matrix> g_consistency = consistency_loss_gradient(in.transitions);
  grad->clean_evidence.assign(views, Vector());
  grad->transitions.assign(views, Matrix());
  for (std::size_t v = 0; v < views; ++v) {
    const OpinionD& opinion = fwd.noisy_opinions[v];
    OpinionGradient<double> g_op = g_opinions[v];
    Matrix g_t = weights.gamma * g_consistency[v];

    if (has_batch_means) {
      const auto g_diag = diag_constraint_gradient(in.transitions[v], opinion.uncertainty, label, in.batch_mean_u[v]);
      g_op.uncertainty += weights.beta * g_diag.uncertainty;
      g_t.diagonal() += weights.beta * g_diag.diagonal;
    }
    if (has_neighbors) {
      g_t += weights.beta *
             offdiag_constraint_gradient(in.transitions[v], in.neighbor_transitions[v], in.neighbor_similarity[v]);
    }

    // Noisy alpha (= noisy evidence + 1) gradient from the opinion and from the view loss.
    const Vector g_noisy = evidence_to_opinion_adjoint(opinion, g_op) +
                           view_loss_gradient(fwd.noisy_alpha[v], in.label, epoch, weights);
    // e~ = T^T e.
    g_t += in.clean_evidence[v] * g_noisy.transpose();
    Vector g_clean = in.transitions[v] * g_noisy;

    if (with_mse) {
      // p = alpha / S, loss (1/V) ||y - p||^2.
      const Vector& p = fwd.clean_probs[v];
      const Vector g_p = 2.0 / static_cast<double>(views) * (p - in.label);
      const double strength = fwd.clean_alpha[v].sum();
      g_clean += ((g_p.array() - g_p.dot(p)) / strength).matrix();
    }
    grad->clean_evidence[v] = std::move(g_clean);
    grad->transitions[v] = std::move(g_t);
  }
  return out;
}

}  // namespace

double annealing_coefficient(int epoch, int horizon) {
  if (horizon <= 0) return 1.0;
  return std::clamp(static_cast<double>(epoch) / static_cast<double>(horizon), 0.0, 1.0);
}

Index hard_label(const Eigen::Ref<const Vector>& y) {
  Index best = 0;
  for (Index c = 1; c < y.size(); ++c) {
    if (y(c) > y(best)) best = c;
  }
  return best;
}

double ace_loss(const Eigen::Ref<const Vector>& alpha, const Eigen::Ref<const Vector>& y) {
  require_same_size(alpha, y, "ace_loss");
  const double psi_strength = digamma(alpha.sum());
  double loss = 0;
  for (Index c = 0; c < alpha.size(); ++c) {
    if (y(c) != 0.0) loss += y(c) * (psi_strength - digamma(alpha(c)));
  }
  return loss;
}

Vector ace_loss_gradient(const Eigen::Ref<const Vector>& alpha, const Eigen::Ref<const Vector>& y) {
  require_same_size(alpha, y, "ace_loss");
  const double shared = y.sum() * trigamma(alpha.sum());
  Vector g(alpha.size());
  for (Index c = 0; c < alpha.size(); ++c) g(c) = shared - y(c) * trigamma(alpha(c));
  return g;
}

double kl_regularizer(const Eigen::Ref<const Vector>& alpha, Index label) {
  const Vector masked = kl_masked(alpha, label);
  const double classes = static_cast<double>(masked.size());
  const double strength = masked.sum();
  const double psi_strength = digamma(strength);
  double kl = log_gamma(strength) - log_gamma(classes);
  for (Index c = 0; c < masked.size(); ++c) {
    kl += (masked(c) - 1.0) * (digamma(masked(c)) - psi_strength) - log_gamma(masked(c));
  }
  return std::max(kl, 0.0);
}

Vector kl_regularizer_gradient(const Eigen::Ref<const Vector>& alpha, Index label) {
  const Vector masked = kl_masked(alpha, label);
  const double strength = masked.sum();
  const double shared = (strength - static_cast<double>(masked.size())) * trigamma(strength);
  Vector g(masked.size());
  for (Index c = 0; c < masked.size(); ++c) g(c) = (masked(c) - 1.0) * trigamma(masked(c)) - shared;
  g(label) = 0.0;
  return g;
}

double view_loss(const Eigen::Ref<const Vector>& alpha, const Eigen::Ref<const Vector>& y, int epoch,
                 const LossWeights& weights) {
  const double delta = annealing_coefficient(epoch, weights.anneal_epochs);
  double loss = ace_loss(alpha, y);
  if (delta > 0.0) loss += delta * kl_regularizer(alpha, hard_label(y));
  return loss;
}

Vector view_loss_gradient(const Eigen::Ref<const Vector>& alpha, const Eigen::Ref<const Vector>& y, int epoch,
                          const LossWeights& weights) {
  const double delta = annealing_coefficient(epoch, weights.anneal_epochs);
  Vector g = ace_loss_gradient(alpha, y);
  if (delta > 0.0) g += delta * kl_regularizer_gradient(alpha, hard_label(y));
  return g;
}

double diag_constraint(const Eigen::Ref<const Matrix>& t, double uncertainty, Index label,
                       const ClassMeans& batch_mean_u) {
  double loss = 0;
  for (Index c = 0; c < t.rows(); ++c) {
    double target;
    if (c == label) {
      target = 1.0 - uncertainty;
    } else if (static_cast<std::size_t>(c) < batch_mean_u.size() && batch_mean_u[c].has_value()) {
      target = 1.0 - *batch_mean_u[c];
    } else {
      continue;
    }
    const double diff = target - t(c, c);
    loss += diff * diff;
  }
  return loss;
}

DiagConstraintGradient diag_constraint_gradient(const Eigen::Ref<const Matrix>& t, double uncertainty, Index label,
                                                const ClassMeans& batch_mean_u) {
  DiagConstraintGradient g{0.0, Vector::Zero(t.rows())};
  for (Index c = 0; c < t.rows(); ++c) {
    if (c == label) {
      const double diff = (1.0 - uncertainty) - t(c, c);
      g.diagonal(c) = -2.0 * diff;
      g.uncertainty = -2.0 * diff;
    } else if (static_cast<std::size_t>(c) < batch_mean_u.size() && batch_mean_u[c].has_value()) {
      g.diagonal(c) = -2.0 * ((1.0 - *batch_mean_u[c]) - t(c, c));
    }
  }
  return g;
}

double offdiag_constraint(const Eigen::Ref<const Matrix>& t, std::span<const Matrix> neighbors,
                          std::span<const double> similarity) {
  if (neighbors.size() != similarity.size()) throw std::invalid_argument("offdiag_constraint: size mismatch");
  double loss = 0;
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    Matrix diff = t - neighbors[k];
    diff.diagonal().setZero();
    loss += similarity[k] * diff.squaredNorm();
  }
  return loss;
}

Matrix offdiag_constraint_gradient(const Eigen::Ref<const Matrix>& t, std::span<const Matrix> neighbors,
                                   std::span<const double> similarity) {
  Matrix g = Matrix::Zero(t.rows(), t.cols());
  for (std::size_t k = 0; k < neighbors.size(); ++k) g += 2.0 * similarity[k] * (t - neighbors[k]);
  g.diagonal().setZero();
  return g;
}

namespace {

// Offsets from the first view keep the mean exact when all views agree.
Matrix view_mean(std::span<const Matrix> views) {
  const Matrix& first = views.front();
  Matrix offset = Matrix::Zero(first.rows(), first.cols());
  for (const auto& t : views) offset += t - first;
  return first + offset / static_cast<double>(views.size());
}

}  // namespace

double consistency_loss(std::span<const Matrix> views) {
  if (views.empty()) throw std::invalid_argument("consistency_loss: no views");
  const Matrix mean = view_mean(views);
  double loss = 0;
  for (const auto& t : views) loss += (t - mean).cwiseAbs().sum();
  return loss / static_cast<double>(views.size());
}

std::vector<Matrix> consistency_loss_gradient(std::span<const Matrix> views) {
  const double count = static_cast<double>(views.size());
  const Matrix mean = view_mean(views);
  std::vector<Matrix> signs;
  Matrix sign_sum = Matrix::Zero(mean.rows(), mean.cols());
  for (const auto& t : views) {
    signs.push_back((t - mean).array().sign().matrix());
    sign_sum += signs.back();
  }
  // d/dt^v: (1/V) [sign_v - (1/V) sum_w sign_w]
  for (auto& s : signs) s = (s - sign_sum / count) / count;
  return signs;
}

double mse_mixed_loss(std::span<const Vector> clean_probs, const Eigen::Ref<const Vector>& y) {
  if (clean_probs.empty()) throw std::invalid_argument("mse_mixed_loss: no views");
  double loss = 0;
  for (const auto& p : clean_probs) loss += (y - p).squaredNorm();
  return loss / static_cast<double>(clean_probs.size());
}

ForwardResult forward_noisy(std::span<const Vector> clean_evidence, std::span<const Matrix> transitions) {
  if (clean_evidence.empty() || clean_evidence.size() != transitions.size()) {
    throw std::invalid_argument("forward_noisy: need one transition matrix per view");
  }
  ForwardResult fwd;
  for (std::size_t v = 0; v < clean_evidence.size(); ++v) {
    Vector alpha = clean_evidence[v].array() + 1.0;
    fwd.clean_probs.push_back(expected_probabilities(alpha));
    fwd.clean_alpha.push_back(std::move(alpha));
    fwd.noisy_evidence.push_back(transfer_evidence(clean_evidence[v], transitions[v]));
    fwd.noisy_alpha.push_back(fwd.noisy_evidence.back().array() + 1.0);
    fwd.noisy_opinions.push_back(evidence_to_opinion(fwd.noisy_evidence.back()));
  }
  fwd.partial_fusions = fold_partials(fwd.noisy_opinions);
  fwd.fused = fwd.partial_fusions.back();
  fwd.fused_alpha = opinion_to_dirichlet(fwd.fused);
  return fwd;
}

Vector fuse_clean(std::span<const Vector> clean_evidence) {
  std::vector<OpinionD> opinions;
  for (const auto& e : clean_evidence) opinions.push_back(evidence_to_opinion(e));
  return opinion_to_dirichlet(combine<double>(opinions));
}

LossBreakdown total_loss_clean(const SampleInputs& in, int epoch, const LossWeights& weights, SampleGradient* grad) {
  return evaluate_objective(in, epoch, weights, false, grad);
}

LossBreakdown total_loss_noisy(const SampleInputs& in, int epoch, const LossWeights& weights, SampleGradient* grad) {
  return evaluate_objective(in, epoch, weights, true, grad);
}

double warmup_loss(std::span<const Vector> clean_evidence, const Eigen::Ref<const Vector>& y,
                   std::vector<Vector>* grad) {
  std::vector<OpinionD> opinions;
  std::vector<Vector> alphas;
  for (const auto& e : clean_evidence) {
    opinions.push_back(evidence_to_opinion(e));
    alphas.push_back(e.array() + 1.0);
  }
  const auto partials = fold_partials(opinions);
  const Vector fused_alpha = opinion_to_dirichlet(partials.back());

  double loss = ace_loss(fused_alpha, y);
  for (const auto& a : alphas) loss += ace_loss(a, y);
  if (grad == nullptr) return loss;

  const auto g_opinions =
      fold_adjoint(opinions, partials, opinion_to_dirichlet_adjoint(partials.back(), ace_loss_gradient(fused_alpha, y)));
  grad->clear();
  for (std::size_t v = 0; v < opinions.size(); ++v) {
    grad->push_back(evidence_to_opinion_adjoint(opinions[v], g_opinions[v]) + ace_loss_gradient(alphas[v], y));
  }
  return loss;
}

}  // namespace tmnr
