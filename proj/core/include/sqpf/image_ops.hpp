#pragma once

#include "sqpf/grid.hpp"

namespace sqpf {

// Bilinear resampling with half-pixel centers. Used for slice images.
RealGrid resize_bilinear(const RealGrid& in, int out_rows, int out_cols);

// Nearest-neighbor resampling; keeps masks binary.
MaskGrid resize_nearest(const MaskGrid& in, int out_rows, int out_cols);

// Area-average reduction: each output cell is the mean of its input block.
// Input dims must be integer multiples of the output dims.
RealGrid block_average(const RealGrid& in, int out_rows, int out_cols);

// Integer-factor nearest upsampling (pixel replication).
MaskGrid upsample_nearest(const MaskGrid& in, int factor);

// In-place zero-mean unit-variance normalization. Slices with (near-)zero
// variance become all zeros.
void normalize_slice(RealGrid& img);

// Clamp intensities to [lo, hi]. The CT soft-tissue window is [-125, 275] HU.
void window_clip(RealGrid& img, double lo, double hi);

// Clamp the upper tail at the given percentile (0..100) of the slice.
void window_percentile_upper(RealGrid& img, double percentile);

template <typename T>
Grid2D<T> flip_horizontal(const Grid2D<T>& in) {
  Grid2D<T> out(in.rows(), in.cols());
  for (int r = 0; r < in.rows(); ++r)
    for (int c = 0; c < in.cols(); ++c) out(r, c) = in(r, in.cols() - 1 - c);
  return out;
}

template <typename T>
Grid2D<T> flip_vertical(const Grid2D<T>& in) {
  Grid2D<T> out(in.rows(), in.cols());
  for (int r = 0; r < in.rows(); ++r)
    for (int c = 0; c < in.cols(); ++c) out(r, c) = in(in.rows() - 1 - r, c);
  return out;
}

// Rotation about the image center. Images resample bilinearly (zero fill
// outside), masks nearest-neighbor.
RealGrid rotate_bilinear(const RealGrid& in, double angle_rad);
MaskGrid rotate_nearest(const MaskGrid& in, double angle_rad);

}  // namespace sqpf
