#include "tmnr/noise_correction.hpp"

#include <stdexcept>
#include <string>

namespace tmnr {

Vector transfer_evidence(const Eigen::Ref<const Vector>& evidence, const Eigen::Ref<const Matrix>& transition) {
  if (transition.rows() != transition.cols() || transition.rows() != evidence.size()) {
    throw std::invalid_argument("transfer_evidence: dimension mismatch (evidence " + std::to_string(evidence.size()) +
                                ", matrix " + std::to_string(transition.rows()) + "x" +
                                std::to_string(transition.cols()) + ")");
  }
  return transition.transpose() * evidence;
}

Matrix project_row_stochastic(const Eigen::Ref<const Matrix>& raw) {
  Matrix out = raw.cwiseMax(kTransitionFloor).cwiseMin(1.0);
  const Vector row_sums = out.rowwise().sum();
  for (Index r = 0; r < out.rows(); ++r) out.row(r) /= row_sums(r);
  return out;
}

bool is_row_stochastic(const Eigen::Ref<const Matrix>& t, double tol) {
  if ((t.array() < 0.0).any() || (t.array() > 1.0 + tol).any()) return false;
  return ((t.rowwise().sum().array() - 1.0).abs() <= tol).all();
}

std::size_t NoiseMatrixBank::bytes_required(Index instances, Index views, Index classes) {
  return static_cast<std::size_t>(instances) * static_cast<std::size_t>(views) * static_cast<std::size_t>(classes) *
         static_cast<std::size_t>(classes) * sizeof(double);
}

NoiseMatrixBank::NoiseMatrixBank(Index instances, Index views, Index classes, std::size_t memory_cap)
    : instances_(instances), views_(views), classes_(classes) {
  if (instances <= 0 || views <= 0 || classes <= 0) {
    throw std::invalid_argument("NoiseMatrixBank: counts must be positive");
  }
  const std::size_t bytes = bytes_required(instances, views, classes);
  if (bytes > memory_cap) {
    throw ConfigError("noise matrix bank needs " + std::to_string(bytes) + " bytes, above the cap of " +
                      std::to_string(memory_cap));
  }
  data_.assign(bytes / sizeof(double), 0.0);
  for (Index n = 0; n < instances; ++n) {
    for (Index v = 0; v < views; ++v) at(n, v).setIdentity();
  }
}

std::size_t NoiseMatrixBank::offset(Index instance, Index view) const {
  if (instance < 0 || instance >= instances_ || view < 0 || view >= views_) {
    throw std::out_of_range("NoiseMatrixBank: index (" + std::to_string(instance) + ", " + std::to_string(view) +
                            ") out of range");
  }
  return static_cast<std::size_t>((instance * views_ + view) * classes_ * classes_);
}

NoiseMatrixBank::MatrixMap NoiseMatrixBank::at(Index instance, Index view) {
  return MatrixMap(data_.data() + offset(instance, view), classes_, classes_);
}

NoiseMatrixBank::ConstMatrixMap NoiseMatrixBank::at(Index instance, Index view) const {
  return ConstMatrixMap(data_.data() + offset(instance, view), classes_, classes_);
}

}  // namespace tmnr
