#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "tmnr/types.hpp"

namespace tmnr {

/// Entry floor applied by project_row_stochastic before row normalization.
inline constexpr double kTransitionFloor = 1e-6;

/// Default cap on the dense bank size: 2 GiB.
inline constexpr std::size_t kDefaultBankMemoryCap = std::size_t{2} << 30;

/// Noisy evidence e~ = T^T e, i.e. e~_j = sum_c t_cj e_c.
Vector transfer_evidence(const Eigen::Ref<const Vector>& evidence, const Eigen::Ref<const Matrix>& transition);

/// Clips entries to [1e-6, 1] and divides each row by its sum.
Matrix project_row_stochastic(const Eigen::Ref<const Matrix>& raw);

/// True when all entries lie in [0, 1] and every row sums to 1 within `tol`.
bool is_row_stochastic(const Eigen::Ref<const Matrix>& t, double tol = 1e-9);

/// One C x C transition matrix per (training instance, view), stored densely
/// as N * V * C * C doubles.
class NoiseMatrixBank {
 public:
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  NoiseMatrixBank() = default;

  /// Every matrix starts as the identity. Throws ConfigError when the bank
  /// would exceed `memory_cap` bytes.
  NoiseMatrixBank(Index instances, Index views, Index classes, std::size_t memory_cap = kDefaultBankMemoryCap);

  static std::size_t bytes_required(Index instances, Index views, Index classes);

  Index instances() const { return instances_; }
  Index views() const { return views_; }
  Index classes() const { return classes_; }
  std::size_t size() const { return static_cast<std::size_t>(instances_ * views_); }
  bool empty() const { return size() == 0; }

  MatrixMap at(Index instance, Index view);
  ConstMatrixMap at(Index instance, Index view) const;

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t offset(Index instance, Index view) const;

  Index instances_ = 0;
  Index views_ = 0;
  Index classes_ = 0;
  std::vector<double> data_;
};

}  // namespace tmnr
