#pragma once

#include <span>
#include <vector>

#include "tmnr/similarity_graph.hpp"
#include "tmnr/types.hpp"

namespace tmnr {

/// Jensen-Shannon divergence with base-2 logs, so the result lies in [0, 1].
double js_divergence(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q);

/// Numerically stable exponential normalization.
Vector softmax(const Eigen::Ref<const Vector>& x);

/// Evidence-label consistency of instance n in one view:
///   [JS(y_n, softmax(e_n)) + sum_k s_nk JS(y_n, softmax(e_mk))] / (1 + sum_k s_nk).
/// `evidence` and `labels` hold one row per training instance.
double view_consistency(Index n, const ViewGraph& graph, const Eigen::Ref<const Matrix>& evidence,
                        const Eigen::Ref<const Matrix>& labels);

struct ConsistencyTable {
  Matrix per_view;  ///< N x V
  Vector fused;     ///< N
  Vector eta;       ///< V, variance weights summing to 1
};

/// Variance-weighted fusion of the per-view columns. Uses the unbiased
/// (N - 1) variance; all-zero variances give uniform weights.
ConsistencyTable fuse_consistencies(const Eigen::Ref<const Matrix>& per_view);

/// Per-view consistencies for every instance, then fuse_consistencies.
ConsistencyTable consistency_table(std::span<const ViewGraph> graphs, std::span<const Matrix> evidence,
                                   const Eigen::Ref<const Matrix>& labels);

/// Indices with fused consistency strictly above epsilon, ascending.
std::vector<Index> separate_noisy(const Eigen::Ref<const Vector>& fused, double epsilon);

}  // namespace tmnr
