#include "tmnr/noise_identification.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tmnr {

namespace {

// sum_i p_i log2(p_i / m_i) with 0 log 0 = 0.
double kl_base2(const Eigen::Ref<const Vector>& p, const Vector& m) {
  double kl = 0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) kl += p(i) * std::log2(p(i) / m(i));
  }
  return kl;
}

}  // namespace

double js_divergence(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("js_divergence: dimension mismatch");
  const Vector m = 0.5 * (p + q);
  return std::clamp(0.5 * kl_base2(p, m) + 0.5 * kl_base2(q, m), 0.0, 1.0);
}

Vector softmax(const Eigen::Ref<const Vector>& x) {
  const Vector shifted = (x.array() - x.maxCoeff()).exp();
  return shifted / shifted.sum();
}

double view_consistency(Index n, const ViewGraph& graph, const Eigen::Ref<const Matrix>& evidence,
                        const Eigen::Ref<const Matrix>& labels) {
  const Vector y = labels.row(n).transpose();
  double total = js_divergence(y, softmax(evidence.row(n).transpose()));
  double weight = 1.0;
  const auto row = neighbors_of(graph, n);
  for (std::size_t k = 0; k < row.indices.size(); ++k) {
    total += row.similarity[k] * js_divergence(y, softmax(evidence.row(row.indices[k]).transpose()));
    weight += row.similarity[k];
  }
  return total / weight;
}

ConsistencyTable fuse_consistencies(const Eigen::Ref<const Matrix>& per_view) {
  const Index n = per_view.rows();
  const Index views = per_view.cols();
  if (n < 2) throw std::invalid_argument("fuse_consistencies: need at least two instances");
  ConsistencyTable table;
  table.per_view = per_view;
  table.eta.resize(views);
  for (Index v = 0; v < views; ++v) {
    // Centering on the first entry keeps a constant column at exactly zero variance.
    const auto shifted = per_view.col(v).array() - per_view(0, v);
    const double mean = shifted.mean();
    table.eta(v) = (shifted - mean).square().sum() / static_cast<double>(n - 1);
  }
  const double total = table.eta.sum();
  if (total > 0.0) {
    table.eta /= total;
  } else {
    table.eta.setConstant(1.0 / static_cast<double>(views));
  }
  table.fused = per_view * table.eta;
  return table;
}

ConsistencyTable consistency_table(std::span<const ViewGraph> graphs, std::span<const Matrix> evidence,
                                   const Eigen::Ref<const Matrix>& labels) {
  if (graphs.size() != evidence.size() || graphs.empty()) {
    throw std::invalid_argument("consistency_table: need one graph and one evidence matrix per view");
  }
  const Index n = labels.rows();
  Matrix per_view(n, static_cast<Index>(graphs.size()));
  for (std::size_t v = 0; v < graphs.size(); ++v) {
    for (Index i = 0; i < n; ++i) per_view(i, static_cast<Index>(v)) = view_consistency(i, graphs[v], evidence[v], labels);
  }
  return fuse_consistencies(per_view);
}

std::vector<Index> separate_noisy(const Eigen::Ref<const Vector>& fused, double epsilon) {
  std::vector<Index> out;
  for (Index i = 0; i < fused.size(); ++i) {
    if (fused(i) > epsilon) out.push_back(i);
  }
  return out;
}

}  // namespace tmnr
