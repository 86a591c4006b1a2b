#include "tmnr/checkpoint.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tmnr/dataset.hpp"

namespace tmnr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename Derived>
json flat(const Eigen::DenseBase<Derived>& m) {
  // column-major order
  std::vector<double> values(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>>(values.data(), m.rows(), m.cols()) = m;
  return values;
}

Matrix unflat(const json& j, Index rows, Index cols) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Index>(values.size()) != rows * cols) throw DataError("checkpoint: array has the wrong length");
  return Eigen::Map<const Matrix>(values.data(), rows, cols);
}

json gradient_json(const ViewNet::Gradient& g) {
  return {{"w1", flat(g.w1)}, {"b1", flat(g.b1)}, {"w2", flat(g.w2)}, {"b2", flat(g.b2)}};
}

void gradient_from_json(const json& j, const ViewNet& net, ViewNet::Gradient& g) {
  g.w1 = unflat(j.at("w1"), net.hidden(), net.input_dim());
  g.b1 = unflat(j.at("b1"), net.hidden(), 1);
  g.w2 = unflat(j.at("w2"), net.classes(), net.hidden());
  g.b2 = unflat(j.at("b2"), net.classes(), 1);
}

json config_json(const TrainConfig& c) {
  json j;
  j["mode"] = to_string(c.mode);
  j["lr"] = c.lr;
  j["transition_lr_multiplier"] = c.transition_lr_multiplier;
  j["warmup_epochs"] = c.warmup_epochs;
  j["max_epochs"] = c.max_epochs;
  j["batch_size"] = c.batch_size;
  j["beta"] = c.beta;
  j["gamma"] = c.gamma;
  j["k_neighbors"] = c.k_neighbors;
  j["epsilon"] = c.epsilon;
  j["anneal_epochs"] = c.anneal_epochs;
  j["reidentify_every"] = c.reidentify_every;
  j["hidden"] = c.hidden;
  j["evidence_activation"] = to_string(c.activation);
  j["partner_strategy"] = to_string(c.partner_strategy);
  j["seed"] = c.seed;
  j["bank_memory_cap"] = c.bank_memory_cap;
  return j;
}

TrainConfig config_from(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "mode",   "lr",          "transition_lr_multiplier", "warmup_epochs", "max_epochs",          "batch_size",
      "beta",   "gamma",       "k_neighbors",              "epsilon",       "anneal_epochs",       "reidentify_every",
      "hidden", "evidence_activation", "partner_strategy", "seed",          "bank_memory_cap"};
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw ConfigError("unknown config key '" + item.key() + "'");
  }
  TrainConfig c;
  try {
    if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
    c.lr = j.value("lr", c.lr);
    c.transition_lr_multiplier = j.value("transition_lr_multiplier", c.transition_lr_multiplier);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.beta = j.value("beta", c.beta);
    c.gamma = j.value("gamma", c.gamma);
    c.k_neighbors = j.value("k_neighbors", c.k_neighbors);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.anneal_epochs = j.value("anneal_epochs", c.anneal_epochs);
    c.reidentify_every = j.value("reidentify_every", c.reidentify_every);
    c.hidden = j.value("hidden", c.hidden);
    if (j.contains("evidence_activation")) c.activation = parse_activation(j["evidence_activation"].get<std::string>());
    if (j.contains("partner_strategy")) {
      c.partner_strategy = parse_partner_strategy(j["partner_strategy"].get<std::string>());
    }
    c.seed = j.value("seed", c.seed);
    c.bank_memory_cap = j.value("bank_memory_cap", c.bank_memory_cap);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

TrainConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from(j);
}

TrainConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  return config_from_json_text(text.str());
}

std::string config_to_json_text(const TrainConfig& config) { return config_json(config).dump(2); }

std::string checkpoint_text(const TrainState& state, CheckpointKind kind) {
  json j;
  j["format"] = "tmnr-checkpoint";
  j["version"] = kCheckpointVersion;
  j["kind"] = kind == CheckpointKind::training ? "training" : "inference";
  j["config"] = config_json(state.config);
  j["classes"] = state.classes;
  j["epoch"] = state.epoch;
  json nets = json::array();
  for (const auto& net : state.nets) {
    nets.push_back({{"input_dim", net.input_dim()},
                    {"hidden", net.hidden()},
                    {"activation", to_string(net.activation())},
                    {"w1", flat(net.w1())},
                    {"b1", flat(net.b1())},
                    {"w2", flat(net.w2())},
                    {"b2", flat(net.b2())}});
  }
  j["nets"] = nets;
  if (kind == CheckpointKind::training) {
    j["step"] = state.step;
    json moments = json::array();
    for (const auto& m : state.moments) moments.push_back({{"m", gradient_json(m.m)}, {"v", gradient_json(m.v)}});
    j["moments"] = moments;
    j["noisy"] = state.noisy;
    std::ostringstream rng;
    rng << state.rng;
    j["rng"] = rng.str();
    if (!state.bank.empty()) {
      j["bank"] = {{"instances", state.bank.instances()},
                   {"views", state.bank.views()},
                   {"data", std::vector<double>(state.bank.data().begin(), state.bank.data().end())},
                   {"m", state.bank_m},
                   {"v", state.bank_v},
                   {"steps", state.bank_steps}};
    }
  }
  return j.dump() + '\n';
}

void save_checkpoint(const TrainState& state, const fs::path& file, CheckpointKind kind) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream(file, std::ios::binary) << checkpoint_text(state, kind);
}

TrainState load_checkpoint(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw MissingFileError("cannot open checkpoint " + file.string());
  try {
    const json j = json::parse(in);
    if (j.value("format", "") != "tmnr-checkpoint") throw DataError(file.string() + ": not a checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw DataError(file.string() + ": unsupported checkpoint version " + j.at("version").dump());
    }
    TrainState state;
    state.config = config_from(j.at("config"));
    state.classes = j.at("classes").get<Index>();
    state.epoch = j.at("epoch").get<int>();
    for (const auto& n : j.at("nets")) {
      ViewNet net;
      const Index d = n.at("input_dim").get<Index>();
      const Index h = n.at("hidden").get<Index>();
      net.w1() = unflat(n.at("w1"), h, d);
      net.b1() = unflat(n.at("b1"), h, 1);
      net.w2() = unflat(n.at("w2"), state.classes, h);
      net.b2() = unflat(n.at("b2"), state.classes, 1);
      net.set_activation(parse_activation(n.at("activation").get<std::string>()));
      state.nets.push_back(std::move(net));
    }
    if (j.value("kind", "") == "training") {
      state.step = j.at("step").get<std::int64_t>();
      const auto& moments = j.at("moments");
      for (std::size_t v = 0; v < state.nets.size(); ++v) {
        AdamMoments m;
        gradient_from_json(moments.at(v).at("m"), state.nets[v], m.m);
        gradient_from_json(moments.at(v).at("v"), state.nets[v], m.v);
        state.moments.push_back(std::move(m));
      }
      state.noisy = j.at("noisy").get<std::vector<Index>>();
      std::istringstream rng(j.at("rng").get<std::string>());
      rng >> state.rng;
      if (j.contains("bank")) {
        const auto& b = j["bank"];
        state.bank = NoiseMatrixBank(b.at("instances").get<Index>(), b.at("views").get<Index>(), state.classes,
                                     state.config.bank_memory_cap);
        const auto data = b.at("data").get<std::vector<double>>();
        if (data.size() != state.bank.data().size()) throw DataError(file.string() + ": bank size mismatch");
        std::copy(data.begin(), data.end(), state.bank.data().begin());
        state.bank_m = b.at("m").get<std::vector<double>>();
        state.bank_v = b.at("v").get<std::vector<double>>();
        state.bank_steps = b.at("steps").get<std::vector<std::int64_t>>();
      }
    }
    return state;
  } catch (const json::exception& e) {
    throw DataError(file.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(file.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(file.string() + ": " + e.what());
  }
}

}  // namespace tmnr
