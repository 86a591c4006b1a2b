#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmnr/losses.hpp"
#include "tmnr/noise_correction.hpp"
#include "tmnr/refine.hpp"
#include "tmnr/subjective_logic.hpp"
#include "tmnr/types.hpp"

namespace tmnr {

enum class EvidenceActivation { softplus, relu };
EvidenceActivation parse_activation(const std::string& name);
std::string to_string(EvidenceActivation activation);

/// Training objective family.
///  - baseline: evidential fusion without noise correction (T fixed at identity)
///  - tmnr:     learned per-instance transition matrices with the uncertainty-guided constraints
///  - tmnr2:    tmnr plus periodic noise identification, pseudo-labeling and mixup refinement
enum class Mode { baseline, tmnr, tmnr2 };
Mode parse_mode(const std::string& name);
std::string to_string(Mode mode);

/// Evidential MLP d -> h -> C with ReLU hidden units and a non-negative output activation.
class ViewNet {
 public:
  struct Cache {
    Vector input;
    Vector hidden_pre;
    Vector output_pre;
  };

  struct Gradient {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;

    void set_zero_like(const ViewNet& net);
  };

  ViewNet() = default;
  /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  ViewNet(Index input_dim, Index hidden, Index classes, EvidenceActivation activation, Rng& rng);

  Index input_dim() const { return w1_.cols(); }
  Index hidden() const { return w1_.rows(); }
  Index classes() const { return w2_.rows(); }
  EvidenceActivation activation() const { return activation_; }

  Vector forward(const Eigen::Ref<const Vector>& x) const;
  Vector forward(const Eigen::Ref<const Vector>& x, Cache& cache) const;
  /// Evidence for every row of `x`.
  Matrix forward_rows(const Eigen::Ref<const Matrix>& x) const;

  /// Accumulates d objective / d parameters into `grad`.
  void backward(const Cache& cache, const Eigen::Ref<const Vector>& grad_evidence, Gradient& grad) const;

  Matrix& w1() { return w1_; }
  Vector& b1() { return b1_; }
  Matrix& w2() { return w2_; }
  Vector& b2() { return b2_; }
  const Matrix& w1() const { return w1_; }
  const Vector& b1() const { return b1_; }
  const Matrix& w2() const { return w2_; }
  const Vector& b2() const { return b2_; }

  void set_activation(EvidenceActivation a) { activation_ = a; }

 private:
  Matrix w1_;
  Vector b1_;
  Matrix w2_;
  Vector b2_;
  EvidenceActivation activation_ = EvidenceActivation::softplus;
};

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers shaped like a ViewNet's parameters.
struct AdamMoments {
  ViewNet::Gradient m;
  ViewNet::Gradient v;
};

/// One bias-corrected Adam step on every parameter of `net`; `step` is 1-based.
void adam_step(ViewNet& net, const ViewNet::Gradient& grad, AdamMoments& moments, std::int64_t step, double lr,
               const AdamSettings& settings);

struct TrainConfig {
  Mode mode = Mode::tmnr2;
  double lr = 1e-3;
  double transition_lr_multiplier = 1.0;
  int warmup_epochs = 15;
  int max_epochs = 100;
  int batch_size = 128;
  double beta = 0.1;
  double gamma = 0.1;
  Index k_neighbors = 5;
  double epsilon = 0.8;
  int anneal_epochs = 0;  ///< 0 means max_epochs / 2
  int reidentify_every = 10;
  Index hidden = 0;       ///< 0 means max(64, 2C)
  EvidenceActivation activation = EvidenceActivation::softplus;
  PartnerStrategy partner_strategy = PartnerStrategy::uniform;
  std::uint64_t seed = 0;
  std::size_t bank_memory_cap = kDefaultBankMemoryCap;
  AdamSettings adam;

  LossWeights loss_weights() const;
  Index hidden_width(Index classes) const;
  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Everything the training loop mutates.
struct TrainState {
  TrainConfig config;
  Index classes = 0;
  std::vector<ViewNet> nets;
  std::vector<AdamMoments> moments;
  std::int64_t step = 0;

  NoiseMatrixBank bank;                    ///< empty in baseline mode and in inference checkpoints
  std::vector<double> bank_m;
  std::vector<double> bank_v;
  std::vector<std::int64_t> bank_steps;    ///< per-matrix step counts (lazy Adam)

  int epoch = 0;
  std::vector<Index> noisy;                ///< sorted, sticky
  Rng rng;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0;
  bool warmup = false;
};

/// One noise identification / refinement round.
struct RefinementRound {
  int epoch = 0;
  Vector fused_consistency;
  Vector eta;
  std::vector<Index> flagged;  ///< noisy set after the union update
  std::vector<RefinementEntry> entries;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<RefinementRound> rounds;
};

/// Optional clean labels of the training set, used only for refinement diagnostics.
struct TrainOptions {
  std::span<const Index> ground_truth = {};
  TrainLog* log = nullptr;
};

/// Warmup followed by the main loop up to config.max_epochs.
TrainState train(const TrainingSet& data, const TrainConfig& config, const TrainOptions& options = {});

/// Per-view clean evidence and the full clean/noisy forward pass for training instance n.
ForwardResult forward_train(const TrainState& state, Index n, std::span<const Vector> features);

struct Prediction {
  Index label = 0;
  Vector probabilities;
  double uncertainty = 1.0;
  std::vector<OpinionD> view_opinions;
};

/// Fused clean opinion; the transition bank is never consulted.
Prediction predict(const TrainState& state, std::span<const Vector> features);

struct BatchPrediction {
  IndexVector labels;
  Matrix probabilities;  ///< N x C
  Vector uncertainty;
};

BatchPrediction predict_rows(const TrainState& state, std::span<const Matrix> views);

}  // namespace tmnr
