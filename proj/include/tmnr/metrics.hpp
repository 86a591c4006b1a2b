#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tmnr/dataset.hpp"
#include "tmnr/network.hpp"
#include "tmnr/types.hpp"

namespace tmnr {

/// Corrected / still-wrong counts of the injected noisy labels after one refinement round.
struct CorrectionPoint {
  int epoch = 0;
  Index corrected = 0;
  Index still_wrong = 0;
};

struct MetricsReport {
  Index count = 0;
  double accuracy = 0;
  Vector class_uncertainty;            ///< mean u per true class; NaN for classes absent from the test set
  std::vector<Index> histogram;        ///< counts of u over equal-width bins on [0, 1]
  IndexMatrix confusion;               ///< rows: true class, columns: predicted class
  std::vector<CorrectionPoint> correction_curve;
};

constexpr int kDefaultHistogramBins = 50;

MetricsReport evaluate(const TrainState& state, const MultiViewDataset& test, int bins = kDefaultHistogramBins);

/// Same as evaluate, from predictions already computed.
MetricsReport summarize(const BatchPrediction& prediction, const IndexVector& labels, Index classes,
                        int bins = kDefaultHistogramBins);

/// For every refinement round: how many of the injected noisy instances carry
/// a pseudo-label equal to their clean label. An injected instance counts as
/// corrected once it has been flagged and relabelled correctly in its latest
/// refinement.
std::vector<CorrectionPoint> correction_curve(const TrainLog& log, std::span<const Index> injected,
                                              std::span<const Index> clean_labels);

/// metrics.json plus CSVs (confusion, per-class uncertainty) and a gnuplot-style histogram file.
void write_metrics(const MetricsReport& report, const std::filesystem::path& dir, const std::string& prefix);
MetricsReport read_metrics(const std::filesystem::path& json_file);

}  // namespace tmnr
