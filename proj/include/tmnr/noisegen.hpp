#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tmnr/dataset.hpp"
#include "tmnr/network.hpp"
#include "tmnr/refine.hpp"

namespace tmnr {

struct CorruptionRecord {
  Index index = 0;
  Index original = 0;
  Index corrupted = 0;
  double uncertainty = 0;
};

/// Sequential weighted sampling of `count` distinct indices without
/// replacement, each draw proportional to the remaining weights. When every
/// remaining weight is zero the draw is uniform over the remaining indices.
std::vector<Index> weighted_sample_without_replacement(const Eigen::Ref<const Vector>& weights, Index count, Rng& rng);

/// Flips exactly floor(rate * N) labels chosen by weighted sampling on
/// `uncertainty`; each flipped label becomes argmax over c != y of `evidence`
/// (lowest index on ties). Records are sorted by index.
std::vector<CorruptionRecord> select_corruptions(const IndexVector& labels, const Matrix& evidence,
                                                 const Eigen::Ref<const Vector>& uncertainty, double rate, Rng& rng);

/// Reference classifier: same view-network architecture, clean warmup objective only.
struct ReferenceClassifierOptions {
  double holdout_fraction = 0.2;
  int epochs = 40;
  double lr = 1e-2;
  int batch_size = 32;
};

struct CorruptionResult {
  MultiViewDataset noisy;
  std::vector<CorruptionRecord> records;
  Vector uncertainty;  ///< reference-model u of every instance; empty when nothing was scored
};

/// Instance-dependent corruption: a reference classifier trained on a random
/// clean subset scores every instance, then select_corruptions flips labels.
/// Throws ConfigError unless 0 <= rate < 1.
CorruptionResult corrupt_labels(const MultiViewDataset& clean, double rate, std::uint64_t seed,
                                const ReferenceClassifierOptions& options = {});

void write_corruption_records(std::span<const CorruptionRecord> records, const std::filesystem::path& file);
std::vector<CorruptionRecord> read_corruption_records(const std::filesystem::path& file);

}  // namespace tmnr
