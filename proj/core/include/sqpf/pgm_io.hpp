#pragma once

#include <cstdint>
#include <filesystem>

#include "sqpf/grid.hpp"

namespace sqpf {

// Binary PGM (P5) and PPM (P6). 16-bit samples are big-endian as per the
// netpbm convention. These are the lossless grayscale formats used for
// dataset export.

void write_pgm8(const std::filesystem::path& path, const MaskGrid& img, std::uint8_t maxval = 255);
MaskGrid read_pgm8(const std::filesystem::path& path);

void write_pgm16(const std::filesystem::path& path, const Grid2D<std::uint16_t>& img);
Grid2D<std::uint16_t> read_pgm16(const std::filesystem::path& path);

struct RgbImage {
  Grid2D<std::uint8_t> r, g, b;
};

void write_ppm(const std::filesystem::path& path, const RgbImage& img);

// Affine quantization of a real-valued slice into 16-bit samples:
// value = q * scale + offset.
struct QuantizedSlice {
  Grid2D<std::uint16_t> samples;
  double scale = 1.0;
  double offset = 0.0;
};

QuantizedSlice quantize_slice(const RealGrid& img);
RealGrid dequantize_slice(const Grid2D<std::uint16_t>& samples, double scale, double offset);

}  // namespace sqpf
