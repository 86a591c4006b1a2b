#include "tmnr/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tmnr/noise_identification.hpp"
#include "tmnr/similarity_graph.hpp"

namespace tmnr {

namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <typename Derived>
void fill_uniform(Eigen::MatrixBase<Derived>& m, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  // Column-major fill order is part of the determinism contract.
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
}

template <typename Param, typename Grad>
void adam_update(Param& param, const Grad& grad, Param& m, Param& v, double lr, double correction1,
                 double correction2, const AdamSettings& s) {
  m = s.beta1 * m + (1.0 - s.beta1) * grad;
  v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + s.epsilon);
}

// Per-view per-class batch means of the noisy view uncertainty.
std::vector<ClassMeans> batch_class_means(const std::vector<std::vector<double>>& uncertainty,
                                          const std::vector<Index>& labels, Index classes) {
  const std::size_t views = uncertainty.empty() ? 0 : uncertainty.front().size();
  std::vector<ClassMeans> out(views, ClassMeans(static_cast<std::size_t>(classes)));
  for (std::size_t v = 0; v < views; ++v) {
    std::vector<double> sum(static_cast<std::size_t>(classes), 0.0);
    std::vector<int> count(static_cast<std::size_t>(classes), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      sum[labels[i]] += uncertainty[i][v];
      ++count[labels[i]];
    }
    for (Index c = 0; c < classes; ++c) {
      if (count[c] > 0) out[v][c] = sum[c] / count[c];
    }
  }
  return out;
}

class Trainer {
 public:
  Trainer(const TrainingSet& data, const TrainConfig& config, const TrainOptions& options)
      : data_(data), current_(data), options_(options) {
    config.validate();
    if (data.size() < 2 || data.views.empty()) throw DataError("train: need at least two instances and one view");
    for (const auto& view : data.views) {
      if (view.rows() != data.size()) throw DataError("train: view row count differs from label count");
    }
    state_.config = config;
    state_.classes = data.classes();
    state_.rng.seed(config.seed);
    const Index hidden = config.hidden_width(state_.classes);
    for (const auto& view : data.views) {
      state_.nets.emplace_back(view.cols(), hidden, state_.classes, config.activation, state_.rng);
      AdamMoments moments;
      moments.m.set_zero_like(state_.nets.back());
      moments.v.set_zero_like(state_.nets.back());
      state_.moments.push_back(std::move(moments));
    }
    if (config.mode != Mode::baseline) {
      state_.bank = NoiseMatrixBank(data.size(), views(), state_.classes, config.bank_memory_cap);
      state_.bank_m.assign(state_.bank.data().size(), 0.0);
      state_.bank_v.assign(state_.bank.data().size(), 0.0);
      state_.bank_steps.assign(state_.bank.size(), 0);
    }
    weights_ = config.loss_weights();
    if (config.mode == Mode::baseline) {
      weights_.beta = 0.0;
      weights_.gamma = 0.0;
    }
    flagged_.assign(static_cast<std::size_t>(data.size()), false);
  }

  TrainState run() {
    const auto& cfg = state_.config;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      state_.epoch = epoch;
      const bool warmup = epoch < cfg.warmup_epochs;
      if (!warmup && cfg.mode != Mode::baseline && graphs_.empty()) build_graphs();

      std::vector<Index> order(static_cast<std::size_t>(data_.size()));
      std::iota(order.begin(), order.end(), Index{0});
      std::shuffle(order.begin(), order.end(), state_.rng);

      double loss_sum = 0;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        const std::vector<Index> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                       order.begin() + static_cast<std::ptrdiff_t>(stop));
        loss_sum += warmup ? warmup_batch(batch) : main_batch(batch, epoch);
      }
      if (options_.log != nullptr) {
        options_.log->epochs.push_back({epoch, loss_sum / static_cast<double>(data_.size()), warmup});
      }
      if (!warmup && cfg.mode == Mode::tmnr2 && (epoch - cfg.warmup_epochs) % cfg.reidentify_every == 0) {
        refinement_round(epoch);
      }
    }
    state_.epoch = cfg.max_epochs;
    return std::move(state_);
  }

 private:
  std::size_t views() const { return data_.views.size(); }

  void build_graphs() {
    for (const auto& view : data_.views) graphs_.push_back(build_view_graph(view, state_.config.k_neighbors));
  }

  std::vector<ViewNet::Gradient> zero_gradients() const {
    std::vector<ViewNet::Gradient> grads(views());
    for (std::size_t v = 0; v < views(); ++v) grads[v].set_zero_like(state_.nets[v]);
    return grads;
  }

  void step_nets(const std::vector<ViewNet::Gradient>& grads) {
    ++state_.step;
    for (std::size_t v = 0; v < views(); ++v) {
      adam_step(state_.nets[v], grads[v], state_.moments[v], state_.step, state_.config.lr, state_.config.adam);
    }
  }

  double warmup_batch(const std::vector<Index>& batch) {
    auto grads = zero_gradients();
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0;
    std::vector<ViewNet::Cache> caches(views());
    std::vector<Vector> evidence(views());
    std::vector<Vector> g_evidence;
    for (Index n : batch) {
      for (std::size_t v = 0; v < views(); ++v) {
        evidence[v] = state_.nets[v].forward(current_.views[v].row(n).transpose(), caches[v]);
      }
      loss += warmup_loss(evidence, current_.targets.row(n).transpose(), &g_evidence);
      for (std::size_t v = 0; v < views(); ++v) state_.nets[v].backward(caches[v], scale * g_evidence[v], grads[v]);
    }
    step_nets(grads);
    return loss;
  }

  double main_batch(const std::vector<Index>& batch, int epoch) {
    const bool learns_t = state_.config.mode != Mode::baseline;
    const Index classes = state_.classes;
    const double scale = 1.0 / static_cast<double>(batch.size());

    // Pass 1: clean evidence for every batch member, then the batch class means of u.
    std::vector<std::vector<ViewNet::Cache>> caches(batch.size(), std::vector<ViewNet::Cache>(views()));
    std::vector<std::vector<Vector>> evidence(batch.size(), std::vector<Vector>(views()));
    std::vector<std::vector<double>> uncertainty(batch.size(), std::vector<double>(views()));
    std::vector<Index> labels(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Index n = batch[b];
      labels[b] = hard_label(current_.targets.row(n).transpose());
      for (std::size_t v = 0; v < views(); ++v) {
        evidence[b][v] = state_.nets[v].forward(current_.views[v].row(n).transpose(), caches[b][v]);
        if (learns_t) {
          const Vector noisy = transfer_evidence(evidence[b][v], state_.bank.at(n, static_cast<Index>(v)));
          uncertainty[b][v] = evidence_to_opinion(noisy).uncertainty;
        }
      }
    }
    const auto class_means = learns_t ? batch_class_means(uncertainty, labels, classes) : std::vector<ClassMeans>{};

    // Pass 2: per-sample objectives.
    auto grads = zero_gradients();
    std::vector<std::vector<Matrix>> t_grads(batch.size());
    double loss = 0;
    SampleInputs in;
    SampleGradient g;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Index n = batch[b];
      in.clean_evidence = evidence[b];
      in.label = current_.targets.row(n).transpose();
      in.transitions.clear();
      in.neighbor_transitions.clear();
      in.neighbor_similarity.clear();
      in.batch_mean_u = class_means;
      for (std::size_t v = 0; v < views(); ++v) {
        if (!learns_t) {
          in.transitions.push_back(Matrix::Identity(classes, classes));
          continue;
        }
        in.transitions.push_back(state_.bank.at(n, static_cast<Index>(v)));
        const auto row = neighbors_of(graphs_[v], n);
        std::vector<Matrix> neighbor_t;
        for (Index m : row.indices) neighbor_t.push_back(state_.bank.at(m, static_cast<Index>(v)));
        in.neighbor_transitions.push_back(std::move(neighbor_t));
        in.neighbor_similarity.emplace_back(row.similarity.begin(), row.similarity.end());
      }
      const bool refined = flagged_[static_cast<std::size_t>(n)];
      loss += (refined ? total_loss_noisy(in, epoch, weights_, &g) : total_loss_clean(in, epoch, weights_, &g)).total;
      for (std::size_t v = 0; v < views(); ++v) {
        state_.nets[v].backward(caches[b][v], scale * g.clean_evidence[v], grads[v]);
      }
      if (learns_t) t_grads[b] = std::move(g.transitions);
    }
    step_nets(grads);

    if (learns_t) {
      const double lr = state_.config.lr * state_.config.transition_lr_multiplier;
      const auto& s = state_.config.adam;
      const std::size_t block = static_cast<std::size_t>(classes * classes);
      for (std::size_t b = 0; b < batch.size(); ++b) {
        for (std::size_t v = 0; v < views(); ++v) {
          const Index n = batch[b];
          const std::size_t slot = static_cast<std::size_t>(n) * views() + v;
          const auto step = ++state_.bank_steps[slot];
          auto t = state_.bank.at(n, static_cast<Index>(v));
          Eigen::Map<Matrix> m(state_.bank_m.data() + slot * block, classes, classes);
          Eigen::Map<Matrix> var(state_.bank_v.data() + slot * block, classes, classes);
          const Matrix grad = scale * t_grads[b][v];
          m = s.beta1 * m + (1.0 - s.beta1) * grad;
          var = s.beta2 * var + (1.0 - s.beta2) * grad.cwiseProduct(grad);
          const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(step));
          const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(step));
          t.array() -= lr * (m.array() / c1) / ((var.array() / c2).sqrt() + s.epsilon);
          t = project_row_stochastic(t);
        }
      }
    }
    return loss;
  }

  void refinement_round(int epoch) {
    std::vector<Matrix> evidence;
    for (std::size_t v = 0; v < views(); ++v) evidence.push_back(state_.nets[v].forward_rows(data_.views[v]));
    const ConsistencyTable table = consistency_table(graphs_, evidence, data_.targets);

    for (Index n : separate_noisy(table.fused, state_.config.epsilon)) flagged_[static_cast<std::size_t>(n)] = true;
    state_.noisy.clear();
    for (Index n = 0; n < data_.size(); ++n) {
      if (flagged_[static_cast<std::size_t>(n)]) state_.noisy.push_back(n);
    }

    std::vector<Index> pseudo;
    pseudo.reserve(state_.noisy.size());
    for (Index n : state_.noisy) pseudo.push_back(pseudo_label(n, graphs_, evidence, table.eta));

    RefineOptions refine_options;
    refine_options.strategy = state_.config.partner_strategy;
    refine_options.graph = &graphs_.front();
    refine_options.ground_truth = options_.ground_truth;
    auto entries = refine_dataset(current_, data_, state_.noisy, pseudo, state_.rng, refine_options);

    if (options_.log != nullptr) {
      options_.log->rounds.push_back({epoch, table.fused, table.eta, state_.noisy, std::move(entries)});
    }
  }

  const TrainingSet& data_;
  TrainingSet current_;
  TrainOptions options_;
  TrainState state_;
  LossWeights weights_;
  std::vector<ViewGraph> graphs_;
  std::vector<bool> flagged_;
};

}  // namespace

EvidenceActivation parse_activation(const std::string& name) {
  if (name == "softplus") return EvidenceActivation::softplus;
  if (name == "relu") return EvidenceActivation::relu;
  throw ConfigError("unknown evidence_activation '" + name + "' (expected softplus | relu)");
}

std::string to_string(EvidenceActivation activation) {
  return activation == EvidenceActivation::softplus ? "softplus" : "relu";
}

Mode parse_mode(const std::string& name) {
  if (name == "tmnr") return Mode::tmnr;
  if (name == "tmnr2") return Mode::tmnr2;
  if (name == "baseline-no-correction") return Mode::baseline;
  throw ConfigError("unknown mode '" + name + "' (expected tmnr | tmnr2 | baseline-no-correction)");
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::tmnr:
      return "tmnr";
    case Mode::tmnr2:
      return "tmnr2";
    case Mode::baseline:
      return "baseline-no-correction";
  }
  return "";
}

void ViewNet::Gradient::set_zero_like(const ViewNet& net) {
  w1 = Matrix::Zero(net.w1().rows(), net.w1().cols());
  b1 = Vector::Zero(net.b1().size());
  w2 = Matrix::Zero(net.w2().rows(), net.w2().cols());
  b2 = Vector::Zero(net.b2().size());
}

ViewNet::ViewNet(Index input_dim, Index hidden, Index classes, EvidenceActivation activation, Rng& rng)
    : w1_(hidden, input_dim), b1_(hidden), w2_(classes, hidden), b2_(classes), activation_(activation) {
  if (input_dim <= 0 || hidden <= 0 || classes <= 0) throw std::invalid_argument("ViewNet: dimensions must be positive");
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  fill_uniform(w1_, bound1, rng);
  fill_uniform(b1_, bound1, rng);
  fill_uniform(w2_, bound2, rng);
  fill_uniform(b2_, bound2, rng);
}

Vector ViewNet::forward(const Eigen::Ref<const Vector>& x) const {
  Cache cache;
  return forward(x, cache);
}

Vector ViewNet::forward(const Eigen::Ref<const Vector>& x, Cache& cache) const {
  if (x.size() != input_dim()) {
    throw std::invalid_argument("ViewNet::forward: expected " + std::to_string(input_dim()) + " features, got " +
                                std::to_string(x.size()));
  }
  cache.input = x;
  cache.hidden_pre = w1_ * x + b1_;
  cache.output_pre = w2_ * cache.hidden_pre.cwiseMax(0.0) + b2_;
  if (activation_ == EvidenceActivation::softplus) return cache.output_pre.unaryExpr(&softplus);
  return cache.output_pre.cwiseMax(0.0);
}

Matrix ViewNet::forward_rows(const Eigen::Ref<const Matrix>& x) const {
  if (x.cols() != input_dim()) throw std::invalid_argument("ViewNet::forward_rows: feature dimension mismatch");
  Matrix hidden = ((x * w1_.transpose()).rowwise() + b1_.transpose()).cwiseMax(0.0);
  Matrix out = (hidden * w2_.transpose()).rowwise() + b2_.transpose();
  if (activation_ == EvidenceActivation::softplus) return out.unaryExpr(&softplus);
  return out.cwiseMax(0.0);
}

void ViewNet::backward(const Cache& cache, const Eigen::Ref<const Vector>& grad_evidence, Gradient& grad) const {
  Vector g_out;
  if (activation_ == EvidenceActivation::softplus) {
    g_out = grad_evidence.cwiseProduct(cache.output_pre.unaryExpr(&sigmoid));
  } else {
    g_out = grad_evidence.cwiseProduct((cache.output_pre.array() > 0.0).cast<double>().matrix());
  }
  const Vector hidden = cache.hidden_pre.cwiseMax(0.0);
  grad.w2.noalias() += g_out * hidden.transpose();
  grad.b2 += g_out;
  const Vector g_hidden = (w2_.transpose() * g_out).cwiseProduct((cache.hidden_pre.array() > 0.0).cast<double>().matrix());
  grad.w1.noalias() += g_hidden * cache.input.transpose();
  grad.b1 += g_hidden;
}

void adam_step(ViewNet& net, const ViewNet::Gradient& grad, AdamMoments& moments, std::int64_t step, double lr,
               const AdamSettings& settings) {
  const double c1 = 1.0 - std::pow(settings.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(settings.beta2, static_cast<double>(step));
  adam_update(net.w1(), grad.w1, moments.m.w1, moments.v.w1, lr, c1, c2, settings);
  adam_update(net.b1(), grad.b1, moments.m.b1, moments.v.b1, lr, c1, c2, settings);
  adam_update(net.w2(), grad.w2, moments.m.w2, moments.v.w2, lr, c1, c2, settings);
  adam_update(net.b2(), grad.b2, moments.m.b2, moments.v.b2, lr, c1, c2, settings);
}

LossWeights TrainConfig::loss_weights() const {
  return {beta, gamma, anneal_epochs > 0 ? anneal_epochs : std::max(1, max_epochs / 2)};
}

Index TrainConfig::hidden_width(Index classes) const { return hidden > 0 ? hidden : std::max<Index>(64, 2 * classes); }

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(transition_lr_multiplier >= 0.0)) throw ConfigError("transition_lr_multiplier must be non-negative");
  if (warmup_epochs < 0 || max_epochs < 0) throw ConfigError("epoch counts must be non-negative");
  if (warmup_epochs > max_epochs) throw ConfigError("warmup_epochs must not exceed max_epochs");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(beta >= 0.0) || !(gamma >= 0.0) || !std::isfinite(beta) || !std::isfinite(gamma)) {
    throw ConfigError("beta and gamma must be finite and non-negative");
  }
  if (k_neighbors < 1) throw ConfigError("k_neighbors must be >= 1");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  if (anneal_epochs < 0) throw ConfigError("anneal_epochs must be non-negative");
  if (reidentify_every < 1) throw ConfigError("reidentify_every must be >= 1");
  if (hidden < 0) throw ConfigError("hidden must be non-negative");
}

TrainState train(const TrainingSet& data, const TrainConfig& config, const TrainOptions& options) {
  return Trainer(data, config, options).run();
}

ForwardResult forward_train(const TrainState& state, Index n, std::span<const Vector> features) {
  if (features.size() != state.nets.size()) throw std::invalid_argument("forward_train: view count mismatch");
  std::vector<Vector> evidence;
  std::vector<Matrix> transitions;
  for (std::size_t v = 0; v < features.size(); ++v) {
    evidence.push_back(state.nets[v].forward(features[v]));
    if (state.bank.empty()) {
      transitions.push_back(Matrix::Identity(state.classes, state.classes));
    } else {
      transitions.push_back(state.bank.at(n, static_cast<Index>(v)));
    }
  }
  return forward_noisy(evidence, transitions);
}

Prediction predict(const TrainState& state, std::span<const Vector> features) {
  if (features.size() != state.nets.size()) throw std::invalid_argument("predict: view count mismatch");
  Prediction out;
  for (std::size_t v = 0; v < features.size(); ++v) {
    if (features[v].size() != state.nets[v].input_dim()) {
      throw std::invalid_argument("predict: view " + std::to_string(v) + " expects " +
                                  std::to_string(state.nets[v].input_dim()) + " features");
    }
    out.view_opinions.push_back(evidence_to_opinion(state.nets[v].forward(features[v])));
  }
  const OpinionD fused = combine<double>(out.view_opinions);
  out.probabilities = expected_probabilities(opinion_to_dirichlet(fused));
  out.uncertainty = fused.uncertainty;
  out.label = hard_label(out.probabilities);
  return out;
}

BatchPrediction predict_rows(const TrainState& state, std::span<const Matrix> views) {
  if (views.size() != state.nets.size()) throw std::invalid_argument("predict_rows: view count mismatch");
  std::vector<Matrix> evidence;
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (views[v].cols() != state.nets[v].input_dim() || views[v].rows() != views.front().rows()) {
      throw std::invalid_argument("predict_rows: view " + std::to_string(v) + " has the wrong shape");
    }
    evidence.push_back(state.nets[v].forward_rows(views[v]));
  }
  const Index n = views.front().rows();
  BatchPrediction out{IndexVector(n), Matrix(n, state.classes), Vector(n)};
  std::vector<OpinionD> opinions(views.size());
  for (Index i = 0; i < n; ++i) {
    for (std::size_t v = 0; v < views.size(); ++v) opinions[v] = evidence_to_opinion(evidence[v].row(i).transpose());
    const OpinionD fused = combine<double>(opinions);
    const Vector p = expected_probabilities(opinion_to_dirichlet(fused));
    out.probabilities.row(i) = p.transpose();
    out.uncertainty(i) = fused.uncertainty;
    out.labels(i) = hard_label(p);
  }
  return out;
}

}  // namespace tmnr
