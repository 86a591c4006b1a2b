#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "tmnr/types.hpp"

namespace tmnr {

/// K-nearest-neighbor affinity graph over one view's training features.
struct ViewGraph {
  using IndexRows = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RealRows = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  IndexRows neighbors;  ///< N x K, each row sorted by ascending distance
  RealRows distances;   ///< N x K Euclidean distances
  RealRows similarity;  ///< N x K, s = exp(-d^2 / sigma_n^2)
  Vector sigma;           ///< N, mean distance to the K neighbors (floored at 1e-12)

  Index size() const { return neighbors.rows(); }
  Index k() const { return neighbors.cols(); }
};

inline constexpr double kSigmaFloor = 1e-12;

/// Brute-force K-NN graph (rows of `features` are instances). Ties in
/// distance are broken by lower index. Throws std::invalid_argument when K >= N or K < 1.
ViewGraph build_view_graph(const Eigen::Ref<const Matrix>& features, Index k);

struct NeighborRow {
  std::span<const Index> indices;
  std::span<const double> similarity;
};

/// Stored neighbors and similarities of instance n.
NeighborRow neighbors_of(const ViewGraph& graph, Index n);

/// Hex SHA-256 over the shape and raw bytes of a feature matrix.
std::string content_hash(const Eigen::Ref<const Matrix>& features);

/// Graph cache keyed by content_hash(features) and K. Returns nullopt on a miss
/// (absent file, different hash or K).
std::optional<ViewGraph> load_graph_cache(const std::filesystem::path& file, const Eigen::Ref<const Matrix>& features,
                                          Index k);
void save_graph_cache(const std::filesystem::path& file, const Eigen::Ref<const Matrix>& features,
                      const ViewGraph& graph);

}  // namespace tmnr
