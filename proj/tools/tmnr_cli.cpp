// Command-line front end: synth, split, corrupt, train, eval, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tmnr/checkpoint.hpp"
#include "tmnr/dataset.hpp"
#include "tmnr/metrics.hpp"
#include "tmnr/noisegen.hpp"
#include "tmnr/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tmnr;

namespace {

constexpr const char* kRecordsFile = "corruption_records.csv";

std::string number(double x) { return json(x).dump(); }

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  out << text;
}

int cmd_synth(const fs::path& out, std::uint64_t seed, bool separable, double feature_scale, ViewFormat format) {
  SyntheticSpec spec = separable ? separable_synthetic(seed) : default_synthetic(seed);
  if (feature_scale >= 0) spec.feature_scale = feature_scale;
  const auto data = make_synthetic(spec);
  save_dataset(data, out, format);
  std::cout << "wrote " << data.size() << " samples, " << data.view_count() << " views, " << data.classes
            << " classes to " << out.string() << '\n';
  return 0;
}

int cmd_split(const fs::path& data_dir, double fraction, std::uint64_t seed, const fs::path& train_out,
              const fs::path& test_out) {
  const auto data = load_dataset(data_dir);
  const auto [train, test] = split(data, fraction, seed);
  save_dataset(train, train_out);
  save_dataset(test, test_out);
  std::cout << "train " << train.size() << ", test " << test.size() << '\n';
  return 0;
}

int cmd_corrupt(const fs::path& data_dir, double rate, std::uint64_t seed, const fs::path& out) {
  const auto clean = load_dataset(data_dir);
  const auto result = corrupt_labels(clean, rate, seed);
  save_dataset(result.noisy, out);
  write_corruption_records(result.records, out / kRecordsFile);
  std::cout << "corrupted " << result.records.size() << " of " << clean.size() << " labels\n";
  return 0;
}

int cmd_train(const fs::path& data_dir, const fs::path& config_file, const fs::path& run) {
  const TrainConfig config = load_config(config_file);
  const auto data = load_dataset(data_dir);

  // Clean labels are known when the data set came out of `corrupt`.
  std::vector<Index> truth;
  std::vector<Index> injected;
  if (fs::exists(data_dir / kRecordsFile)) {
    truth.assign(data.labels.begin(), data.labels.end());
    for (const auto& r : read_corruption_records(data_dir / kRecordsFile)) {
      if (r.index < 0 || r.index >= data.size()) throw DataError("corruption record index out of range");
      truth[static_cast<std::size_t>(r.index)] = r.original;
      injected.push_back(r.index);
    }
  }

  TrainLog log;
  const TrainState state = train(data.training_set(), config, {truth, &log});

  fs::create_directories(run);
  write_text(run / "config.json", config_to_json_text(config) + '\n');
  save_checkpoint(state, run / "model.json", CheckpointKind::inference);
  save_checkpoint(state, run / "checkpoint.json", CheckpointKind::training);

  std::string text = "epoch,mean_loss,warmup\n";
  for (const auto& e : log.epochs) text += std::to_string(e.epoch) + ',' + number(e.mean_loss) + ',' + (e.warmup ? "1" : "0") + '\n';
  write_text(run / "training_log.csv", text);

  text = "epoch,index,H,flagged\n";
  for (const auto& round : log.rounds) {
    std::vector<bool> flagged(static_cast<std::size_t>(round.fused_consistency.size()), false);
    for (const Index n : round.flagged) flagged[static_cast<std::size_t>(n)] = true;
    for (Index n = 0; n < round.fused_consistency.size(); ++n) {
      text += std::to_string(round.epoch) + ',' + std::to_string(n) + ',' + number(round.fused_consistency(n)) + ',' +
              (flagged[static_cast<std::size_t>(n)] ? "1" : "0") + '\n';
    }
  }
  write_text(run / "identification.csv", text);

  text = "epoch,noisy_index,pseudo_class,partner_index,lambda,was_correct\n";
  for (const auto& round : log.rounds) {
    for (const auto& e : round.entries) {
      text += std::to_string(round.epoch) + ',' + std::to_string(e.noisy) + ',' + std::to_string(e.pseudo) + ',' +
              std::to_string(e.partner) + ',' + number(e.lambda) + ',' +
              (e.correct ? (*e.correct ? "1" : "0") : "") + '\n';
    }
  }
  write_text(run / "refinement.csv", text);

  json summary;
  summary["mode"] = to_string(config.mode);
  summary["samples"] = data.size();
  summary["epochs"] = state.epoch;
  summary["noisy_set_size"] = state.noisy.size();
  summary["refinement_rounds"] = log.rounds.size();
  if (!log.epochs.empty()) summary["final_mean_loss"] = log.epochs.back().mean_loss;
  if (!injected.empty()) {
    text = "epoch,corrected,still_wrong\n";
    json curve = json::array();
    for (const auto& p : correction_curve(log, injected, truth)) {
      text += std::to_string(p.epoch) + ',' + std::to_string(p.corrected) + ',' + std::to_string(p.still_wrong) + '\n';
      curve.push_back({{"epoch", p.epoch}, {"corrected", p.corrected}, {"still_wrong", p.still_wrong}});
    }
    write_text(run / "correction_curve.csv", text);
    summary["injected_noisy"] = injected.size();
    summary["correction_curve"] = curve;
  }
  write_text(run / "summary.json", summary.dump(2) + '\n');
  std::cout << "trained " << state.epoch << " epochs; noisy set " << state.noisy.size() << "; outputs in "
            << run.string() << '\n';
  return 0;
}

std::vector<CorrectionPoint> read_curve(const fs::path& file) {
  std::vector<CorrectionPoint> curve;
  std::ifstream in(file);
  if (!in) return curve;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    CorrectionPoint p;
    char c1 = 0, c2 = 0;
    std::istringstream row(line);
    if (row >> p.epoch >> c1 >> p.corrected >> c2 >> p.still_wrong) curve.push_back(p);
  }
  return curve;
}

int cmd_eval(const fs::path& run, const fs::path& data_dir, const std::string& name) {
  const TrainState state = load_checkpoint(run / "model.json");
  const auto test = load_dataset(data_dir);
  if (test.classes != state.classes || test.dims() != [&] {
        std::vector<Index> d;
        for (const auto& net : state.nets) d.push_back(net.input_dim());
        return d;
      }()) {
    throw ShapeError(data_dir.string() + ": views or classes do not match the model in " + run.string());
  }
  MetricsReport report = evaluate(state, test);
  report.correction_curve = read_curve(run / "correction_curve.csv");
  write_metrics(report, run, name);
  std::cout << "accuracy " << number(report.accuracy) << " over " << report.count << " samples\n";
  return 0;
}

int cmd_report(const fs::path& run) {
  std::map<std::string, MetricsReport> reports;
  for (const auto& entry : fs::directory_iterator(run)) {
    const auto file = entry.path();
    if (file.extension() == ".json" && file.stem().string().rfind("metrics", 0) == 0) {
      reports.emplace(file.stem().string(), read_metrics(file));
    }
  }
  if (reports.empty()) throw DataError(run.string() + ": no metrics*.json found; run `eval` first");
  const fs::path out = run / "report";
  fs::create_directories(out);

  std::string table = "evaluation,samples,accuracy";
  const Index classes = reports.begin()->second.class_uncertainty.size();
  for (Index c = 0; c < classes; ++c) table += ",mean_u_class" + std::to_string(c);
  table += '\n';
  json summary;
  for (const auto& [name, r] : reports) {
    table += name + ',' + std::to_string(r.count) + ',' + number(r.accuracy);
    for (Index c = 0; c < r.class_uncertainty.size(); ++c) table += ',' + number(r.class_uncertainty(c));
    table += '\n';
    summary["evaluations"][name] = {{"samples", r.count}, {"accuracy", r.accuracy}};
  }
  write_text(out / "accuracy_table.csv", table);

  // one column per evaluation, first column is the bin centre
  std::string hist = "# u";
  for (const auto& [name, r] : reports) hist += ' ' + name;
  hist += '\n';
  const std::size_t bins = reports.begin()->second.histogram.size();
  for (std::size_t b = 0; b < bins; ++b) {
    hist += number((static_cast<double>(b) + 0.5) / static_cast<double>(bins));
    for (const auto& [name, r] : reports) hist += ' ' + std::to_string(b < r.histogram.size() ? r.histogram[b] : 0);
    hist += '\n';
  }
  write_text(out / "uncertainty_histograms.dat", hist);

  const auto curve = read_curve(run / "correction_curve.csv");
  std::string curve_text = "# epoch corrected still_wrong\n";
  for (const auto& p : curve) {
    curve_text += std::to_string(p.epoch) + ' ' + std::to_string(p.corrected) + ' ' + std::to_string(p.still_wrong) + '\n';
  }
  write_text(out / "correction_curve.dat", curve_text);
  summary["correction_rounds"] = curve.size();
  if (!curve.empty()) {
    const auto& last = curve.back();
    summary["final_corrected_fraction"] =
        static_cast<double>(last.corrected) / static_cast<double>(std::max<Index>(1, last.corrected + last.still_wrong));
  }
  write_text(out / "report.json", summary.dump(2) + '\n');
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trusted multi-view classification under instance-dependent label noise"};
  app.require_subcommand(1);

  fs::path data_dir, out_dir, run_dir, config_file, train_out, test_out;
  double rate = 0, fraction = 0.2, feature_scale = -1;
  std::uint64_t seed = 0;
  bool separable = false, csv = false;
  std::string name = "metrics";

  auto* synth = app.add_subcommand("synth", "write a synthetic multi-view data set");
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--seed", seed);
  synth->add_flag("--separable", separable, "2-class, 2-view, 200-sample variant");
  synth->add_option("--feature-scale", feature_scale, "standardize columns and scale; 0 keeps raw features");
  synth->add_flag("--csv", csv, "write views as CSV instead of float64 binaries");

  auto* split_cmd = app.add_subcommand("split", "seeded train/test split");
  split_cmd->add_option("--data", data_dir)->required();
  split_cmd->add_option("--fraction", fraction, "test fraction")->capture_default_str();
  split_cmd->add_option("--seed", seed);
  split_cmd->add_option("--train-out", train_out)->required();
  split_cmd->add_option("--test-out", test_out)->required();

  auto* corrupt = app.add_subcommand("corrupt", "inject instance-dependent label noise");
  corrupt->add_option("--data", data_dir)->required();
  corrupt->add_option("--rate", rate)->required();
  corrupt->add_option("--seed", seed);
  corrupt->add_option("--out", out_dir)->required();

  auto* train_cmd = app.add_subcommand("train", "train view networks and transition matrices");
  train_cmd->add_option("--data", data_dir)->required();
  train_cmd->add_option("--config", config_file)->required();
  train_cmd->add_option("--out", run_dir)->required();

  auto* eval = app.add_subcommand("eval", "evaluate a trained run on a data set");
  eval->add_option("--run", run_dir)->required();
  eval->add_option("--data", data_dir)->required();
  eval->add_option("--name", name, "output prefix, must start with 'metrics'")->capture_default_str();

  auto* report = app.add_subcommand("report", "assemble tables and plot data for a run");
  report->add_option("--run", run_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(out_dir, seed, separable, feature_scale, csv ? ViewFormat::csv : ViewFormat::binary);
    if (*split_cmd) return cmd_split(data_dir, fraction, seed, train_out, test_out);
    if (*corrupt) return cmd_corrupt(data_dir, rate, seed, out_dir);
    if (*train_cmd) return cmd_train(data_dir, config_file, run_dir);
    if (*eval) {
      if (name.rfind("metrics", 0) != 0) throw ConfigError("--name must start with 'metrics'");
      return cmd_eval(run_dir, data_dir, name);
    }
    if (*report) return cmd_report(run_dir);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
