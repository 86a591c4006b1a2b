#include "tmnr/refine.hpp"

#include <algorithm>
#include <stdexcept>

namespace tmnr {

std::vector<Vector> TrainingSet::features(Index n) const {
  std::vector<Vector> out;
  out.reserve(views.size());
  for (const auto& view : views) out.push_back(view.row(n).transpose());
  return out;
}

Index pseudo_label(Index n, std::span<const ViewGraph> graphs, std::span<const Matrix> evidence,
                   const Eigen::Ref<const Vector>& eta) {
  if (graphs.size() != evidence.size() || static_cast<Index>(graphs.size()) != eta.size()) {
    throw std::invalid_argument("pseudo_label: view count mismatch");
  }
  Vector aggregate = Vector::Zero(evidence.front().cols());
  for (std::size_t v = 0; v < graphs.size(); ++v) {
    Vector local = evidence[v].row(n).transpose();
    const auto row = neighbors_of(graphs[v], n);
    for (std::size_t k = 0; k < row.indices.size(); ++k) {
      local += row.similarity[k] * evidence[v].row(row.indices[k]).transpose();
    }
    aggregate += eta(static_cast<Index>(v)) * local;
  }
  Index best = 0;
  for (Index c = 1; c < aggregate.size(); ++c) {
    if (aggregate(c) > aggregate(best)) best = c;
  }
  return best;
}

double sample_mix_coefficient(Rng& rng) {
  std::gamma_distribution<double> shape(0.3, 1.0);
  const double a = shape(rng);
  const double b = shape(rng);
  // Both draws can underflow to 0 for such a small shape parameter.
  const double lambda = (a + b > 0.0) ? a / (a + b) : 0.5;
  return std::max(lambda, 1.0 - lambda);
}

MixedSample mix_pair(std::span<const Vector> noisy_features, Index pseudo_class, std::span<const Vector> clean_features,
                     Index clean_class, Index classes, double lambda) {
  if (noisy_features.size() != clean_features.size()) throw std::invalid_argument("mix_pair: view count mismatch");
  if (pseudo_class < 0 || pseudo_class >= classes || clean_class < 0 || clean_class >= classes) {
    throw std::invalid_argument("mix_pair: class out of range");
  }
  MixedSample out;
  out.lambda = lambda;
  for (std::size_t v = 0; v < noisy_features.size(); ++v) {
    if (noisy_features[v].size() != clean_features[v].size()) {
      throw std::invalid_argument("mix_pair: feature dimension mismatch in view " + std::to_string(v));
    }
    out.features.push_back(lambda * noisy_features[v] + (1.0 - lambda) * clean_features[v]);
  }
  out.label = Vector::Zero(classes);
  out.label(pseudo_class) += lambda;
  out.label(clean_class) += 1.0 - lambda;
  return out;
}

MixedSample mixup_pair(std::span<const Vector> noisy_features, Index pseudo_class,
                       std::span<const Vector> clean_features, Index clean_class, Index classes, Rng& rng) {
  return mix_pair(noisy_features, pseudo_class, clean_features, clean_class, classes, sample_mix_coefficient(rng));
}

PartnerStrategy parse_partner_strategy(const std::string& name) {
  if (name == "uniform") return PartnerStrategy::uniform;
  if (name == "nearest") return PartnerStrategy::nearest;
  throw ConfigError("unknown partner_strategy '" + name + "' (expected uniform | nearest)");
}

std::string to_string(PartnerStrategy strategy) {
  return strategy == PartnerStrategy::uniform ? "uniform" : "nearest";
}

std::vector<RefinementEntry> refine_dataset(TrainingSet& current, const TrainingSet& original,
                                            std::span<const Index> noisy, std::span<const Index> pseudo_labels,
                                            Rng& rng, const RefineOptions& options) {
  if (noisy.size() != pseudo_labels.size()) throw std::invalid_argument("refine_dataset: one pseudo-label per noisy index");
  if (noisy.empty()) return {};
  const Index n = current.size();

  std::vector<bool> flagged(static_cast<std::size_t>(n), false);
  for (Index i : noisy) flagged.at(static_cast<std::size_t>(i)) = true;
  std::vector<Index> clean;
  for (Index i = 0; i < n; ++i) {
    if (!flagged[i]) clean.push_back(i);
  }
  if (noisy.size() > clean.size()) {
    throw ConfigError("refine_dataset: " + std::to_string(noisy.size()) + " flagged samples but only " +
                      std::to_string(clean.size()) + " clean partners; raise epsilon");
  }

  std::vector<Index> partners;
  if (options.strategy == PartnerStrategy::uniform || options.graph == nullptr) {
    std::shuffle(clean.begin(), clean.end(), rng);
    partners.assign(clean.begin(), clean.begin() + static_cast<std::ptrdiff_t>(noisy.size()));
  } else {
    // Most similar unused clean neighbor, falling back to a uniform draw from what is left.
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    std::shuffle(clean.begin(), clean.end(), rng);
    std::size_t fallback = 0;
    for (Index i : noisy) {
      Index chosen = -1;
      for (Index m : neighbors_of(*options.graph, i).indices) {
        if (!flagged[m] && !used[m]) {
          chosen = m;
          break;
        }
      }
      while (chosen < 0) {
        const Index candidate = clean[fallback++];
        if (!used[candidate]) chosen = candidate;
      }
      used[chosen] = true;
      partners.push_back(chosen);
    }
  }

  std::vector<RefinementEntry> log;
  log.reserve(noisy.size());
  for (std::size_t r = 0; r < noisy.size(); ++r) {
    const Index i = noisy[r];
    const Index j = partners[r];
    const auto noisy_features = original.features(i);
    const auto clean_features = current.features(j);
    const Index clean_class = [&] {
      Index best = 0;
      for (Index c = 1; c < current.classes(); ++c) {
        if (current.targets(j, c) > current.targets(j, best)) best = c;
      }
      return best;
    }();
    MixedSample mixed = mixup_pair(noisy_features, pseudo_labels[r], clean_features, clean_class, current.classes(), rng);
    for (std::size_t v = 0; v < current.views.size(); ++v) current.views[v].row(i) = mixed.features[v].transpose();
    current.targets.row(i) = mixed.label.transpose();

    RefinementEntry entry{i, pseudo_labels[r], j, mixed.lambda, std::nullopt};
    if (!options.ground_truth.empty()) entry.correct = options.ground_truth[i] == pseudo_labels[r];
    log.push_back(entry);
  }
  return log;
}

}  // namespace tmnr
