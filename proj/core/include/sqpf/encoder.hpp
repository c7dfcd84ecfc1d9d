#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sqpf/tensor.hpp"

namespace sqpf {

// Feature maps are {C, H/stride, W/stride} tensors.
using FeatureMap = Tensor;

enum class EncoderKind { kPretrainedDeep, kTiny };

struct EncoderSpec {
  EncoderKind kind = EncoderKind::kTiny;
  int feature_channels = 32;
  int stride = 4;  // output spatial reduction factor
  // Checkpoint path supplying pretrained parameters; empty means seeded
  // random initialization.
  std::string weights_source;
};

std::string encoder_kind_name(EncoderKind kind);
EncoderKind encoder_kind_from_name(const std::string& name);

// Named, ordered parameter list. Order is fixed by the architecture, which
// keeps optimizer state and serialization stable.
using ParamSet = std::vector<std::pair<std::string, Tensor>>;

// The feature extractor. Two realizations behind one contract:
//  - kTiny: four 3x3 conv blocks (conv/norm/relu) with two stride-2
//    reductions; trains in minutes on a CPU.
//  - kPretrainedDeep: a residual conv trunk (7x7 stem + two residual
//    stages) ending before any pyramid-pooling head; parameters are
//    expected to come from `weights_source`.
// Both reduce spatial dims by exactly `stride` (must be 4).
class Encoder {
 public:
  Encoder(EncoderSpec spec, std::uint64_t init_seed);

  const EncoderSpec& spec() const { return spec_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Feature extraction. Input dims must be divisible by the stride and all
  // values finite. Differentiable with respect to the parameters.
  FeatureMap encode(const RealGrid& image) const;

  // Replace parameter values (names and shapes must match exactly).
  void set_param_values(const std::vector<std::pair<std::string, std::vector<double>>>& values);
  std::vector<std::pair<std::string, std::vector<double>>> param_values() const;

  void save_params(const std::filesystem::path& path) const;
  void load_params(const std::filesystem::path& path);

 private:
  EncoderSpec spec_;
  ParamSet params_;
};

// Area-average reduction of a mask to the feature grid; each output cell is
// the mean of its input block, so values lie in [0,1] and total mass scales
// by exactly the block size.
RealGrid downsample_mask(const MaskGrid& mask, int out_rows, int out_cols);
RealGrid downsample_mask(const RealGrid& mask, int out_rows, int out_cols);

}  // namespace sqpf
