#pragma once

// Versioned JSON checkpoint holding everything needed to resume training
// bit-identically: config, epoch, student and teacher weights, smoothed
// predictions, detector and RNG state, plus the epoch log so far.

#include <filesystem>

#include "adagc/trainer.hpp"
#include "json.hpp"

namespace adagc {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json checkpoint_to_json(const TrainState& state);
TrainState checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace adagc
