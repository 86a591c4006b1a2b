#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tmnr/refine.hpp"
#include "tmnr/types.hpp"

namespace tmnr {

/// A file named in meta.json is missing or unreadable.
class MissingFileError : public DataError {
 public:
  using DataError::DataError;
};

/// Row/column counts disagree between meta.json, view files and labels.
class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

/// A label lies outside [0, C).
class LabelRangeError : public DataError {
 public:
  using DataError::DataError;
};

/// A file's SHA-256 differs from the one recorded in meta.json.
class ChecksumError : public DataError {
 public:
  using DataError::DataError;
};

struct MultiViewDataset {
  std::string name;
  Index classes = 0;
  std::vector<Matrix> views;  ///< N x d_v each
  IndexVector labels;

  Index size() const { return labels.size(); }
  Index view_count() const { return static_cast<Index>(views.size()); }
  std::vector<Index> dims() const;

  /// Throws ShapeError / LabelRangeError.
  void validate() const;
  /// One-hot targets.
  TrainingSet training_set() const;
  MultiViewDataset subset(std::span<const Index> indices) const;
  std::vector<Vector> features(Index n) const;
};

enum class ViewFormat { binary, csv };

/// Reads `dir/meta.json`, one view file per view (little-endian float64
/// row-major binary or CSV) and `labels.csv`. Records the SHA-256 of every
/// file read into `checksums` (keyed by file name) when given.
MultiViewDataset load_dataset(const std::filesystem::path& dir, std::map<std::string, std::string>* checksums = nullptr);

/// Writes the directory format read by load_dataset, including checksums in meta.json.
void save_dataset(const MultiViewDataset& data, const std::filesystem::path& dir, ViewFormat format = ViewFormat::binary);

/// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& file);

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> test;
};

/// Seeded uniform shuffle, then the first round(fraction * N) indices become the test set.
SplitIndices split_indices(Index n, double test_fraction, std::uint64_t seed);
std::pair<MultiViewDataset, MultiViewDataset> split(const MultiViewDataset& data, double test_fraction,
                                                    std::uint64_t seed);

}  // namespace tmnr
