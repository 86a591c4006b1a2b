#include "tmnr/noisegen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace tmnr {

std::vector<Index> weighted_sample_without_replacement(const Eigen::Ref<const Vector>& weights, Index count, Rng& rng) {
  const Index n = weights.size();
  if (count < 0 || count > n) throw std::invalid_argument("weighted sample: count out of range");
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw std::invalid_argument("weighted sample: weights must be finite and non-negative");
  }
  std::vector<Index> remaining(static_cast<std::size_t>(n));
  std::iota(remaining.begin(), remaining.end(), Index{0});
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(count));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index draw = 0; draw < count; ++draw) {
    double total = 0;
    for (const Index i : remaining) total += weights(i);
    std::size_t pick = remaining.size() - 1;
    if (total > 0) {
      const double target = unit(rng) * total;
      double cumulative = 0;
      for (std::size_t j = 0; j < remaining.size(); ++j) {
        cumulative += weights(remaining[j]);
        if (target < cumulative && weights(remaining[j]) > 0) {
          pick = j;
          break;
        }
      }
      // rounding can leave target >= cumulative; take the last positive weight
      if (pick == remaining.size() - 1) {
        while (pick > 0 && weights(remaining[pick]) <= 0) --pick;
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, remaining.size() - 1)(rng);
    }
    chosen.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return chosen;
}

std::vector<CorruptionRecord> select_corruptions(const IndexVector& labels, const Matrix& evidence,
                                                 const Eigen::Ref<const Vector>& uncertainty, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("corruption rate must lie in [0, 1)");
  const Index n = labels.size();
  if (evidence.rows() != n || uncertainty.size() != n) throw std::invalid_argument("select_corruptions: size mismatch");
  if (evidence.cols() < 2) throw ConfigError("corruption needs at least two classes");
  const auto count = static_cast<Index>(std::floor(rate * static_cast<double>(n)));
  auto chosen = weighted_sample_without_replacement(uncertainty, count, rng);
  std::sort(chosen.begin(), chosen.end());

  std::vector<CorruptionRecord> records;
  for (const Index i : chosen) {
    const Index y = labels(i);
    Index best = -1;
    for (Index c = 0; c < evidence.cols(); ++c) {
      if (c != y && (best < 0 || evidence(i, c) > evidence(i, best))) best = c;
    }
    records.push_back({i, y, best, uncertainty(i)});
  }
  return records;
}

CorruptionResult corrupt_labels(const MultiViewDataset& clean, double rate, std::uint64_t seed,
                                const ReferenceClassifierOptions& options) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("corruption rate must lie in [0, 1)");
  clean.validate();
  CorruptionResult result{clean, {}, {}};
  if (rate == 0.0 || clean.size() == 0) return result;

  Rng rng(seed);
  const auto holdout = split_indices(clean.size(), options.holdout_fraction, rng());

  TrainConfig reference;
  reference.mode = Mode::baseline;
  reference.warmup_epochs = options.epochs;
  reference.max_epochs = options.epochs;
  reference.lr = options.lr;
  reference.batch_size = options.batch_size;
  reference.seed = rng();
  const TrainState g = train(clean.subset(holdout.test).training_set(), reference);

  const BatchPrediction scored = predict_rows(g, clean.views);
  // fused evidence e = alpha - 1 = p * S - 1 with S = C / u
  Matrix evidence(clean.size(), clean.classes);
  for (Index i = 0; i < clean.size(); ++i) {
    const double strength = static_cast<double>(clean.classes) / scored.uncertainty(i);
    evidence.row(i) = scored.probabilities.row(i) * strength;
    evidence.row(i).array() -= 1.0;
  }

  result.uncertainty = scored.uncertainty;
  result.records = select_corruptions(clean.labels, evidence, scored.uncertainty, rate, rng);
  for (const auto& r : result.records) result.noisy.labels(r.index) = r.corrupted;
  return result;
}

void write_corruption_records(std::span<const CorruptionRecord> records, const std::filesystem::path& file) {
  std::ofstream out(file);
  out << "index,original,corrupted,uncertainty\n";
  for (const auto& r : records) {
    out << r.index << ',' << r.original << ',' << r.corrupted << ',' << nlohmann::json(r.uncertainty).dump() << '\n';
  }
}

std::vector<CorruptionRecord> read_corruption_records(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw MissingFileError("cannot open " + file.string());
  std::vector<CorruptionRecord> records;
  std::string line;
  std::getline(in, line);  // header
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::istringstream row(line);
    CorruptionRecord r;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(row >> r.index >> c1 >> r.original >> c2 >> r.corrupted >> c3 >> r.uncertainty) || c1 != ',' || c2 != ',' ||
        c3 != ',') {
      throw DataError(file.string() + ": malformed record at line " + std::to_string(line_number));
    }
    records.push_back(r);
  }
  return records;
}

}  // namespace tmnr
