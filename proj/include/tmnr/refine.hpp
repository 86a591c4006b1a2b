#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tmnr/similarity_graph.hpp"
#include "tmnr/types.hpp"

namespace tmnr {

using Rng = std::mt19937_64;

/// Per-view feature matrices (rows are instances) with soft targets.
struct TrainingSet {
  std::vector<Matrix> views;
  Matrix targets;  ///< N x C, rows on the simplex

  Index size() const { return targets.rows(); }
  Index classes() const { return targets.cols(); }
  std::vector<Vector> features(Index n) const;
};

/// Aggregated-evidence pseudo-label:
/// argmax_c sum_v eta_v (e_n^v + sum_k s_nk e_mk^v), lowest index on ties.
Index pseudo_label(Index n, std::span<const ViewGraph> graphs, std::span<const Matrix> evidence,
                   const Eigen::Ref<const Vector>& eta);

/// lambda' = max(lambda, 1 - lambda) with lambda ~ Beta(0.3, 0.3).
double sample_mix_coefficient(Rng& rng);

struct MixedSample {
  std::vector<Vector> features;
  Vector label;
  Index noisy = 0;
  Index partner = 0;
  double lambda = 1.0;
};

/// Convex combination lambda' * noisy + (1 - lambda') * clean in every view and in the label.
MixedSample mix_pair(std::span<const Vector> noisy_features, Index pseudo_class, std::span<const Vector> clean_features,
                     Index clean_class, Index classes, double lambda);

/// mix_pair with a freshly drawn lambda'.
MixedSample mixup_pair(std::span<const Vector> noisy_features, Index pseudo_class,
                       std::span<const Vector> clean_features, Index clean_class, Index classes, Rng& rng);

enum class PartnerStrategy { uniform, nearest };

PartnerStrategy parse_partner_strategy(const std::string& name);
std::string to_string(PartnerStrategy strategy);

struct RefinementEntry {
  Index noisy = 0;
  Index pseudo = 0;
  Index partner = 0;
  double lambda = 1.0;
  std::optional<bool> correct;  ///< pseudo-label matches ground truth, when known
};

struct RefineOptions {
  PartnerStrategy strategy = PartnerStrategy::uniform;
  const ViewGraph* graph = nullptr;            ///< neighbor source for PartnerStrategy::nearest
  std::span<const Index> ground_truth = {};    ///< optional clean labels, one per instance
};

/// Replaces every noisy instance of `current` with a mixup of its original
/// features (taken from `original`) and a distinct clean partner. Clean
/// partners are left untouched. Throws ConfigError when the noisy set is
/// larger than the clean set.
std::vector<RefinementEntry> refine_dataset(TrainingSet& current, const TrainingSet& original,
                                            std::span<const Index> noisy, std::span<const Index> pseudo_labels,
                                            Rng& rng, const RefineOptions& options = {});

}  // namespace tmnr
