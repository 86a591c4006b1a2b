#include "tmnr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "json.hpp"

namespace tmnr {

namespace fs = std::filesystem;
using nlohmann::json;

MetricsReport summarize(const BatchPrediction& prediction, const IndexVector& labels, Index classes, int bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  MetricsReport report;
  report.count = labels.size();
  report.confusion = IndexMatrix::Zero(classes, classes);
  report.histogram.assign(static_cast<std::size_t>(bins), 0);
  Vector u_sum = Vector::Zero(classes);
  Vector u_count = Vector::Zero(classes);
  for (Index i = 0; i < labels.size(); ++i) {
    report.confusion(labels(i), prediction.labels(i)) += 1;
    const double u = prediction.uncertainty(i);
    u_sum(labels(i)) += u;
    u_count(labels(i)) += 1;
    const int bin = std::clamp(static_cast<int>(std::floor(u * bins)), 0, bins - 1);
    ++report.histogram[static_cast<std::size_t>(bin)];
  }
  report.accuracy = report.count == 0 ? 0.0
                                      : static_cast<double>(report.confusion.trace()) / static_cast<double>(report.count);
  report.class_uncertainty.resize(classes);
  for (Index c = 0; c < classes; ++c) {
    report.class_uncertainty(c) = u_count(c) > 0 ? u_sum(c) / u_count(c) : std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

MetricsReport evaluate(const TrainState& state, const MultiViewDataset& test, int bins) {
  return summarize(predict_rows(state, test.views), test.labels, state.classes, bins);
}

std::vector<CorrectionPoint> correction_curve(const TrainLog& log, std::span<const Index> injected,
                                              std::span<const Index> clean_labels) {
  std::map<Index, Index> latest;  // instance -> most recent pseudo-label
  std::vector<CorrectionPoint> curve;
  for (const auto& round : log.rounds) {
    for (const auto& entry : round.entries) latest[entry.noisy] = entry.pseudo;
    CorrectionPoint point;
    point.epoch = round.epoch;
    for (const Index n : injected) {
      const auto it = latest.find(n);
      if (it != latest.end() && it->second == clean_labels[static_cast<std::size_t>(n)]) {
        ++point.corrected;
      } else {
        ++point.still_wrong;
      }
    }
    curve.push_back(point);
  }
  return curve;
}

namespace {

json to_json(const MetricsReport& r) {
  json j;
  j["count"] = r.count;
  j["accuracy"] = r.accuracy;
  j["class_uncertainty"] = std::vector<double>(r.class_uncertainty.begin(), r.class_uncertainty.end());
  j["histogram"] = r.histogram;
  json confusion = json::array();
  for (Index i = 0; i < r.confusion.rows(); ++i) {
    std::vector<Index> row(r.confusion.cols());
    for (Index c = 0; c < r.confusion.cols(); ++c) row[static_cast<std::size_t>(c)] = r.confusion(i, c);
    confusion.push_back(row);
  }
  j["confusion"] = confusion;
  json curve = json::array();
  for (const auto& p : r.correction_curve) {
    curve.push_back({{"epoch", p.epoch}, {"corrected", p.corrected}, {"still_wrong", p.still_wrong}});
  }
  j["correction_curve"] = curve;
  return j;
}

}  // namespace

void write_metrics(const MetricsReport& report, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  std::ofstream(dir / (prefix + ".json")) << to_json(report).dump(2) << '\n';

  std::ofstream confusion(dir / (prefix + "_confusion.csv"));
  for (Index i = 0; i < report.confusion.rows(); ++i) {
    for (Index c = 0; c < report.confusion.cols(); ++c) confusion << (c ? "," : "") << report.confusion(i, c);
    confusion << '\n';
  }

  std::ofstream classes(dir / (prefix + "_class_uncertainty.csv"));
  classes << "class,mean_uncertainty\n";
  for (Index c = 0; c < report.class_uncertainty.size(); ++c) {
    classes << c << ',' << json(report.class_uncertainty(c)).dump() << '\n';
  }

  // bin centre, count
  std::ofstream hist(dir / (prefix + "_uncertainty_hist.dat"));
  const double width = 1.0 / static_cast<double>(report.histogram.size());
  for (std::size_t b = 0; b < report.histogram.size(); ++b) {
    hist << json((static_cast<double>(b) + 0.5) * width).dump() << ' ' << report.histogram[b] << '\n';
  }
}

MetricsReport read_metrics(const fs::path& json_file) {
  std::ifstream in(json_file);
  if (!in) throw MissingFileError("cannot open " + json_file.string());
  json j;
  try {
    j = json::parse(in);
    MetricsReport r;
    r.count = j.at("count").get<Index>();
    r.accuracy = j.at("accuracy").get<double>();
    const auto& cu = j.at("class_uncertainty");
    r.class_uncertainty.resize(static_cast<Index>(cu.size()));
    for (std::size_t c = 0; c < cu.size(); ++c) {
      r.class_uncertainty(static_cast<Index>(c)) =
          cu[c].is_null() ? std::numeric_limits<double>::quiet_NaN() : cu[c].get<double>();
    }
    r.histogram = j.at("histogram").get<std::vector<Index>>();
    const auto rows = j.at("confusion").get<std::vector<std::vector<Index>>>();
    r.confusion = IndexMatrix::Zero(static_cast<Index>(rows.size()), static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < rows[i].size(); ++c) r.confusion(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
    }
    for (const auto& p : j.at("correction_curve")) {
      r.correction_curve.push_back({p.at("epoch").get<int>(), p.at("corrected").get<Index>(), p.at("still_wrong").get<Index>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(json_file.string() + ": " + e.what());
  }
}

}  // namespace tmnr
