#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqpf/encoder.hpp"
#include "sqpf/folds.hpp"

namespace sqpf {

// One training/evaluation run, fully resolved. Serializes to a canonical
// key=value block whose hash stamps reports and checkpoints.
struct TrainConfig {
  // episode schedule
  int episodes_per_epoch = 100;
  int epochs = 20;
  // optimizer (SGD with momentum, stepped decay)
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int lr_step_epochs = 0;  // 0 disables decay
  double lr_decay = 0.1;
  // pipeline
  int n_regions = 4;
  double alpha = 0.5;  // beta = 1 - alpha
  double temperature = 20.0;
  double t_b = 0.5;
  // episodic protocol
  int n_way = 1;
  int k_shot = 1;
  Setting setting = Setting::kSetting1;
  int fold_index = 0;
  int k_folds = 5;
  std::uint64_t seed = 0;
  std::vector<std::string> train_classes;  // empty = all
  std::vector<std::string> test_classes;   // empty = all (Setting 1 only)
  // loss weights
  double lambda_coarse = 1.0;
  double lambda_final = 1.0;
  // augmentation (training episodes only)
  bool augment = false;
  // evaluation protocol: 0 = per-volume reassembly with fixed supports,
  // otherwise the number of randomly sampled evaluation episodes per class
  int eval_episodes = 0;
  // encoder
  EncoderSpec encoder;

  double beta() const { return 1.0 - alpha; }
};

// Sorted key=value lines; the round-trippable provenance form. Parsing also
// accepts [section] headers (keys inside become section.key), blank lines,
// and #/; comments.
std::string canonical_config_string(const TrainConfig& config);
TrainConfig parse_config_string(const std::string& text);
TrainConfig read_config_file(const std::string& path);

// FNV-1a 64-bit hash of the canonical string, as hex.
std::string config_hash(const TrainConfig& config);
std::string fnv1a_hex(const std::string& text);

void validate_config(const TrainConfig& config);

}  // namespace sqpf
