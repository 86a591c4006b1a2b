#include "tmnr/similarity_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

namespace tmnr {

ViewGraph build_view_graph(const Eigen::Ref<const Matrix>& features, Index k) {
  const Index n = features.rows();
  if (k < 1 || k >= n) {
    throw std::invalid_argument("build_view_graph: need 1 <= K < N (K=" + std::to_string(k) +
                                ", N=" + std::to_string(n) + ")");
  }
  ViewGraph g;
  g.neighbors.resize(n, k);
  g.distances.resize(n, k);
  g.similarity.resize(n, k);
  g.sigma.resize(n);

  std::vector<double> dist2(static_cast<std::size_t>(n));
  std::vector<Index> order;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      dist2[j] = (features.row(i) - features.row(j)).squaredNorm();
    }
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::erase(order, i);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
      return dist2[a] < dist2[b] || (dist2[a] == dist2[b] && a < b);
    });
    double total = 0;
    for (Index r = 0; r < k; ++r) {
      g.neighbors(i, r) = order[r];
      g.distances(i, r) = std::sqrt(dist2[order[r]]);
      total += g.distances(i, r);
    }
    g.sigma(i) = std::max(total / static_cast<double>(k), kSigmaFloor);
    const double sigma2 = g.sigma(i) * g.sigma(i);
    for (Index r = 0; r < k; ++r) {
      g.similarity(i, r) = std::exp(-g.distances(i, r) * g.distances(i, r) / sigma2);
    }
  }
  return g;
}

NeighborRow neighbors_of(const ViewGraph& graph, Index n) {
  if (n < 0 || n >= graph.size()) {
    throw std::out_of_range("neighbors_of: index " + std::to_string(n) + " out of range");
  }
  const auto k = static_cast<std::size_t>(graph.k());
  return {{graph.neighbors.data() + n * graph.k(), k}, {graph.similarity.data() + n * graph.k(), k}};
}

std::string content_hash(const Eigen::Ref<const Matrix>& features) {
  const Matrix dense = features;  // contiguous column-major copy
  const std::int64_t shape[2] = {dense.rows(), dense.cols()};
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, shape, sizeof(shape));
  EVP_DigestUpdate(ctx, dense.data(), static_cast<std::size_t>(dense.size()) * sizeof(double));
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  std::ostringstream out;
  for (unsigned int i = 0; i < length; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return out.str();
}

std::optional<ViewGraph> load_graph_cache(const std::filesystem::path& file, const Eigen::Ref<const Matrix>& features,
                                          Index k) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  if (j.value("hash", std::string{}) != content_hash(features) || j.value("k", Index{-1}) != k) return std::nullopt;
  const Index n = features.rows();
  const auto neighbors = j.at("neighbors").get<std::vector<Index>>();
  const auto distances = j.at("distances").get<std::vector<double>>();
  const auto similarity = j.at("similarity").get<std::vector<double>>();
  const auto sigma = j.at("sigma").get<std::vector<double>>();
  const auto expected = static_cast<std::size_t>(n * k);
  if (neighbors.size() != expected || distances.size() != expected || similarity.size() != expected ||
      sigma.size() != static_cast<std::size_t>(n)) {
    return std::nullopt;
  }
  ViewGraph g;
  g.neighbors = Eigen::Map<const ViewGraph::IndexRows>(neighbors.data(), n, k);
  g.distances = Eigen::Map<const ViewGraph::RealRows>(distances.data(), n, k);
  g.similarity = Eigen::Map<const ViewGraph::RealRows>(similarity.data(), n, k);
  g.sigma = Eigen::Map<const Vector>(sigma.data(), n);
  return g;
}

void save_graph_cache(const std::filesystem::path& file, const Eigen::Ref<const Matrix>& features,
                      const ViewGraph& graph) {
  const auto flat = [](const auto& m) {
    return std::vector<typename std::decay_t<decltype(m)>::Scalar>(m.data(), m.data() + m.size());
  };
  nlohmann::json j;
  j["hash"] = content_hash(features);
  j["k"] = graph.k();
  j["neighbors"] = flat(graph.neighbors);
  j["distances"] = flat(graph.distances);
  j["similarity"] = flat(graph.similarity);
  j["sigma"] = flat(graph.sigma);
  std::ofstream out(file);
  if (!out) throw std::runtime_error("save_graph_cache: cannot write " + file.string());
  out << j.dump();
}

}  // namespace tmnr
