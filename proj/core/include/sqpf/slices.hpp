#pragma once

#include <string>
#include <vector>

#include "sqpf/grid.hpp"
#include "sqpf/volume_io.hpp"

namespace sqpf {

// One 2D training/evaluation unit: a normalized slice image and the binary
// mask of a single class. Only slices with nonempty foreground are kept.
struct SliceSample {
  std::string case_id;
  int slice_index = 0;
  RealGrid image;
  MaskGrid mask;
  std::string class_label;
};

enum class SlicePlane { kAxial, kShortAxis };

// Intensity windowing applied before resizing and normalization.
// kCtSoftTissue clips to [-125, 275] HU; kPercentile caps at the slice's
// 99.5th percentile.
enum class IntensityWindow { kNone, kCtSoftTissue, kPercentile };

// Cuts a volume into per-class 2D slices along the stack axis, resizing
// images bilinearly and masks nearest-neighbor to out_size x out_size, then
// normalizing each image to zero mean and unit variance. Slices whose
// resized mask has no foreground are dropped. A class with no foreground
// anywhere yields no samples (not an error).
std::vector<SliceSample> slice_and_resize(const VolumeRecord& volume, SlicePlane plane,
                                          int out_size,
                                          IntensityWindow window = IntensityWindow::kNone);

}  // namespace sqpf
