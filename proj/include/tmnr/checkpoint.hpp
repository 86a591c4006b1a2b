#pragma once

#include <filesystem>
#include <string>

#include "tmnr/network.hpp"

namespace tmnr {

/// Reads the `train` config keys (lr, warmup_epochs, max_epochs, batch_size,
/// beta, gamma, k_neighbors, epsilon, anneal_epochs, evidence_activation,
/// partner_strategy, seed, mode, plus hidden and reidentify_every). Unknown
/// keys and ill-typed values raise ConfigError; missing keys keep their defaults.
TrainConfig config_from_json_text(const std::string& text);
TrainConfig load_config(const std::filesystem::path& file);
std::string config_to_json_text(const TrainConfig& config);

enum class CheckpointKind {
  inference,  ///< networks only
  training    ///< networks, optimizer moments, transition bank, noisy set, RNG state
};

constexpr int kCheckpointVersion = 1;

std::string checkpoint_text(const TrainState& state, CheckpointKind kind);
void save_checkpoint(const TrainState& state, const std::filesystem::path& file, CheckpointKind kind);
/// Throws DataError on malformed files or an unknown version.
TrainState load_checkpoint(const std::filesystem::path& file);

}  // namespace tmnr
