#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sqpf/config.hpp"

namespace sqpf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Single-file training artifact: encoder parameters, the resolved config
// snapshot, progress counters, and the sampler RNG state. Reloading
// reproduces identical forward outputs.
struct Checkpoint {
  TrainConfig config;
  int epoch = 0;
  bool diverged = false;        // training aborted on a non-finite loss
  std::string rng_state;        // serialized mt19937_64
  std::vector<std::pair<std::string, std::vector<double>>> params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Encoder with the checkpoint's spec and parameter values.
class Encoder;
Encoder encoder_from_checkpoint(const Checkpoint& ckpt);

}  // namespace sqpf
