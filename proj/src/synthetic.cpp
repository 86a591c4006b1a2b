#include "tmnr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tmnr/refine.hpp"

namespace tmnr {

namespace {

template <typename Derived>
void fill_normal(Eigen::DenseBase<Derived>& m, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = normal(rng);
  }
}

}  // namespace

SyntheticSpec default_synthetic(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.seed = seed;
  return spec;
}

SyntheticSpec separable_synthetic(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.samples = 200;
  spec.classes = 2;
  spec.latent_dim = 4;
  spec.view_dims = {6, 8};
  spec.separation = 4.0;
  spec.cluster_std = 0.5;
  spec.view_noise = {0.2, 0.3};
  spec.seed = seed;
  return spec;
}

MultiViewDataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.samples < 1 || spec.classes < 2 || spec.latent_dim < spec.classes || spec.view_dims.empty() ||
      spec.view_noise.size() != spec.view_dims.size()) {
    throw ConfigError("invalid synthetic spec");
  }
  Rng rng(spec.seed);
  Matrix means = Matrix::Zero(spec.classes, spec.latent_dim);
  means.leftCols(spec.classes).diagonal().setConstant(spec.separation);

  std::vector<Index> order(static_cast<std::size_t>(spec.samples));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  MultiViewDataset data;
  data.name = "synthetic";
  data.classes = spec.classes;
  data.labels.resize(spec.samples);
  Matrix latent(spec.samples, spec.latent_dim);
  fill_normal(latent, spec.cluster_std, rng);
  for (Index i = 0; i < spec.samples; ++i) {
    data.labels(i) = order[static_cast<std::size_t>(i)] % spec.classes;
    latent.row(i) += means.row(data.labels(i));
  }

  for (std::size_t v = 0; v < spec.view_dims.size(); ++v) {
    Matrix projection(spec.latent_dim, spec.view_dims[v]);
    fill_normal(projection, 1.0 / std::sqrt(static_cast<double>(spec.latent_dim)), rng);
    Matrix noise(spec.samples, spec.view_dims[v]);
    fill_normal(noise, spec.view_noise[v], rng);
    Matrix x = latent * projection + noise;
    if (spec.feature_scale > 0) {
      for (Index j = 0; j < x.cols(); ++j) {
        auto col = x.col(j).array();
        const double mean = col.mean();
        const double sd = std::sqrt((col - mean).square().mean());
        col = (col - mean) / std::max(sd, 1e-12) * spec.feature_scale;
      }
    }
    data.views.push_back(std::move(x));
  }
  return data;
}

MultiViewDataset add_feature_noise(const MultiViewDataset& data, double sigma, std::uint64_t seed) {
  MultiViewDataset out = data;
  if (sigma <= 0) return out;
  Rng rng(seed);
  for (auto& view : out.views) {
    Matrix noise(view.rows(), view.cols());
    fill_normal(noise, sigma, rng);
    view += noise;
  }
  return out;
}

}  // namespace tmnr
