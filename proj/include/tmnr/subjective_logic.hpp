#pragma once

#include <span>
#include <stdexcept>
#include <utility>

#include <Eigen/Core>

namespace tmnr {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Raised when two opinions are (numerically) in total conflict, 1 - Con < 1e-12.
class TotalConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Subjective-logic opinion over C singleton classes: belief masses plus an
/// uncertainty mass, sum(belief) + uncertainty == 1.
template <typename Scalar>
struct Opinion {
  VectorX<Scalar> belief;
  Scalar uncertainty = Scalar(1);

  Eigen::Index classes() const { return belief.size(); }

  static Opinion vacuous(Eigen::Index classes) {
    return Opinion{VectorX<Scalar>::Zero(classes), Scalar(1)};
  }
};

using OpinionD = Opinion<double>;

template <typename Scalar>
constexpr Scalar kConflictTolerance = Scalar(1e-12);

/// b = e / S, u = C / S with S = sum(e + 1).
template <typename Derived>
Opinion<typename Derived::Scalar> evidence_to_opinion(const Eigen::MatrixBase<Derived>& evidence) {
  using Scalar = typename Derived::Scalar;
  const auto classes = evidence.size();
  const Scalar strength = evidence.sum() + Scalar(classes);
  return {evidence / strength, Scalar(classes) / strength};
}

/// Dirichlet concentration of an opinion: S = C / u, alpha = b * S + 1.
template <typename Scalar>
VectorX<Scalar> opinion_to_dirichlet(const Opinion<Scalar>& opinion) {
  if (!(opinion.uncertainty > Scalar(0))) {
    throw std::invalid_argument("opinion_to_dirichlet: uncertainty must be > 0");
  }
  const Scalar strength = Scalar(opinion.classes()) / opinion.uncertainty;
  return (opinion.belief * strength).array() + Scalar(1);
}

template <typename Derived>
VectorX<typename Derived::Scalar> expected_probabilities(const Eigen::MatrixBase<Derived>& alpha) {
  return alpha / alpha.sum();
}

/// Conflict Con = sum_{i != j} b1_i b2_j.
template <typename Scalar>
Scalar conflict(const Opinion<Scalar>& a, const Opinion<Scalar>& b) {
  return a.belief.sum() * b.belief.sum() - a.belief.dot(b.belief);
}

/// Reduced Dempster combination of two opinions over the same classes.
template <typename Scalar>
Opinion<Scalar> combine(const Opinion<Scalar>& a, const Opinion<Scalar>& b) {
  if (a.classes() != b.classes()) {
    throw std::invalid_argument("combine: opinions have different class counts");
  }
  const Scalar scale = Scalar(1) - conflict(a, b);
  if (scale < kConflictTolerance<Scalar>) {
    throw TotalConflictError("combine: opinions are in total conflict");
  }
  Opinion<Scalar> out;
  out.belief = (a.belief.cwiseProduct(b.belief) + a.belief * b.uncertainty + b.belief * a.uncertainty) / scale;
  out.uncertainty = a.uncertainty * b.uncertainty / scale;
  return out;
}

/// Left fold of combine() in the given order.
template <typename Scalar>
Opinion<Scalar> combine(std::span<const Opinion<Scalar>> opinions) {
  if (opinions.empty()) {
    throw std::invalid_argument("combine: need at least one opinion");
  }
  Opinion<Scalar> fused = opinions.front();
  for (std::size_t i = 1; i < opinions.size(); ++i) {
    fused = combine(fused, opinions[i]);
  }
  return fused;
}

// ---------------------------------------------------------------------------
// Reverse-mode adjoints. Each takes the gradient of a scalar objective w.r.t.
// the output and returns the gradient w.r.t. the inputs.

template <typename Scalar>
struct OpinionGradient {
  VectorX<Scalar> belief;
  Scalar uncertainty = 0;
};

/// Adjoint of evidence_to_opinion (equivalently of alpha -> opinion, since alpha = e + 1).
template <typename Scalar>
VectorX<Scalar> evidence_to_opinion_adjoint(const Opinion<Scalar>& opinion, const OpinionGradient<Scalar>& grad) {
  const Scalar strength = Scalar(opinion.classes()) / opinion.uncertainty;
  const Scalar shared = grad.belief.dot(opinion.belief) + grad.uncertainty * opinion.uncertainty;
  return (grad.belief.array() - shared) / strength;
}

/// Adjoint of opinion_to_dirichlet.
template <typename Scalar>
OpinionGradient<Scalar> opinion_to_dirichlet_adjoint(const Opinion<Scalar>& opinion, const VectorX<Scalar>& grad_alpha) {
  const Scalar strength = Scalar(opinion.classes()) / opinion.uncertainty;
  return {grad_alpha * strength, -grad_alpha.dot(opinion.belief) * strength / opinion.uncertainty};
}

/// Adjoint of combine(a, b) given its output `fused`.
template <typename Scalar>
std::pair<OpinionGradient<Scalar>, OpinionGradient<Scalar>> combine_adjoint(const Opinion<Scalar>& a,
                                                                            const Opinion<Scalar>& b,
                                                                            const Opinion<Scalar>& fused,
                                                                            const OpinionGradient<Scalar>& grad) {
  const Scalar scale = Scalar(1) - conflict(a, b);
  // d objective / d scale, then d scale / d b1_i = -(sum b2 - b2_i).
  const Scalar grad_scale = -(grad.belief.dot(fused.belief) + grad.uncertainty * fused.uncertainty) / scale;
  const Scalar sum_a = a.belief.sum();
  const Scalar sum_b = b.belief.sum();

  OpinionGradient<Scalar> ga;
  OpinionGradient<Scalar> gb;
  ga.belief = (grad.belief.cwiseProduct(b.belief + VectorX<Scalar>::Constant(b.classes(), b.uncertainty))) / scale -
              grad_scale * (VectorX<Scalar>::Constant(a.classes(), sum_b) - b.belief);
  gb.belief = (grad.belief.cwiseProduct(a.belief + VectorX<Scalar>::Constant(a.classes(), a.uncertainty))) / scale -
              grad_scale * (VectorX<Scalar>::Constant(b.classes(), sum_a) - a.belief);
  ga.uncertainty = (grad.belief.dot(b.belief) + grad.uncertainty * b.uncertainty) / scale;
  gb.uncertainty = (grad.belief.dot(a.belief) + grad.uncertainty * a.uncertainty) / scale;
  return {ga, gb};
}

}  // namespace tmnr
