#pragma once

#include <cstdint>
#include <vector>

#include "tmnr/dataset.hpp"

namespace tmnr {

/// Gaussian class clusters in a shared latent space, observed through a
/// random linear projection per view plus view-specific noise. Class means sit
/// on the scaled coordinate axes of the latent space, so every pair of classes
/// is equally far apart.
struct SyntheticSpec {
  Index samples = 2000;
  Index classes = 5;
  Index latent_dim = 8;
  std::vector<Index> view_dims = {20, 30, 25};
  double separation = 3.5;                       ///< distance of each class mean from the origin
  double cluster_std = 1.0;
  std::vector<double> view_noise = {0.5, 0.8, 1.2};
  /// Each feature column is standardized and then multiplied by this; 0 keeps raw features.
  double feature_scale = 1;
  std::uint64_t seed = 0;
};

/// The acceptance-scale data set: 3 views, C = 5, 2000 samples.
SyntheticSpec default_synthetic(std::uint64_t seed = 0);
/// 2 views, 2 well separated classes, 200 samples.
SyntheticSpec separable_synthetic(std::uint64_t seed = 0);

/// Balanced classes (sample i has class i mod C before shuffling).
MultiViewDataset make_synthetic(const SyntheticSpec& spec);

/// Copy with independent N(0, sigma^2) noise added to every feature.
MultiViewDataset add_feature_noise(const MultiViewDataset& data, double sigma, std::uint64_t seed);

}  // namespace tmnr
