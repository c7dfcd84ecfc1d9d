#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sqpf/slices.hpp"

namespace sqpf {

struct IntensityRange {
  double lo = 0.0;
  double hi = 1.0;
};

// Desk-scale synthetic dataset: one image per (case, shape family), a single
// shape at a random position/scale/orientation over a flat background, with
// optional additive Gaussian noise. Images are raw intensities; callers
// normalize at assembly time.
struct SyntheticConfig {
  int n_cases = 10;
  int image_size = 256;
  std::vector<std::string> shape_families = {"ellipse", "rectangle", "crescent"};
  double noise_sigma = 0.05;
  // Per-family intensity intervals plus the reserved "background" entry.
  std::map<std::string, IntensityRange> intensity_ranges;
  std::uint64_t seed = 0;
  int min_foreground_pixels = 16;
};

// Config with the stock families and intensity ranges filled in.
SyntheticConfig default_synthetic_config();

std::vector<SliceSample> synth_generate(const SyntheticConfig& config);

}  // namespace sqpf
