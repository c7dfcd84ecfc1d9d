#include "sqpf/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sqpf {

RealGrid resize_bilinear(const RealGrid& in, int out_rows, int out_cols) {
  if (in.empty() || out_rows <= 0 || out_cols <= 0)
    throw DataError("resize_bilinear: empty input or non-positive output size");
  RealGrid out(out_rows, out_cols);
  const double sr = static_cast<double>(in.rows()) / out_rows;
  const double sc = static_cast<double>(in.cols()) / out_cols;
  for (int r = 0; r < out_rows; ++r) {
    double src_r = (r + 0.5) * sr - 0.5;
    src_r = std::clamp(src_r, 0.0, static_cast<double>(in.rows() - 1));
    const int r0 = static_cast<int>(std::floor(src_r));
    const int r1 = std::min(r0 + 1, in.rows() - 1);
    const double fr = src_r - r0;
    for (int c = 0; c < out_cols; ++c) {
      double src_c = (c + 0.5) * sc - 0.5;
      src_c = std::clamp(src_c, 0.0, static_cast<double>(in.cols() - 1));
      const int c0 = static_cast<int>(std::floor(src_c));
      const int c1 = std::min(c0 + 1, in.cols() - 1);
      const double fc = src_c - c0;
      out(r, c) = (1 - fr) * ((1 - fc) * in(r0, c0) + fc * in(r0, c1)) +
                  fr * ((1 - fc) * in(r1, c0) + fc * in(r1, c1));
    }
  }
  return out;
}

MaskGrid resize_nearest(const MaskGrid& in, int out_rows, int out_cols) {
  if (in.empty() || out_rows <= 0 || out_cols <= 0)
    throw DataError("resize_nearest: empty input or non-positive output size");
  MaskGrid out(out_rows, out_cols);
  const double sr = static_cast<double>(in.rows()) / out_rows;
  const double sc = static_cast<double>(in.cols()) / out_cols;
  for (int r = 0; r < out_rows; ++r) {
    int src_r = static_cast<int>(std::floor((r + 0.5) * sr));
    src_r = std::clamp(src_r, 0, in.rows() - 1);
    for (int c = 0; c < out_cols; ++c) {
      int src_c = static_cast<int>(std::floor((c + 0.5) * sc));
      src_c = std::clamp(src_c, 0, in.cols() - 1);
      out(r, c) = in(src_r, src_c) ? 1 : 0;
    }
  }
  return out;
}

RealGrid block_average(const RealGrid& in, int out_rows, int out_cols) {
  if (out_rows <= 0 || out_cols <= 0)
    throw DataError("block_average: non-positive output size");
  if (in.rows() % out_rows != 0 || in.cols() % out_cols != 0)
    throw DataError("block_average: output dims " + std::to_string(out_rows) + "x" +
                    std::to_string(out_cols) + " do not divide input dims " +
                    std::to_string(in.rows()) + "x" + std::to_string(in.cols()));
  const int br = in.rows() / out_rows;
  const int bc = in.cols() / out_cols;
  const double inv = 1.0 / (static_cast<double>(br) * bc);
  RealGrid out(out_rows, out_cols);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      double s = 0.0;
      for (int i = 0; i < br; ++i)
        for (int j = 0; j < bc; ++j) s += in(r * br + i, c * bc + j);
      out(r, c) = s * inv;
    }
  }
  return out;
}

MaskGrid upsample_nearest(const MaskGrid& in, int factor) {
  if (factor <= 0) throw DataError("upsample_nearest: non-positive factor");
  MaskGrid out(in.rows() * factor, in.cols() * factor);
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out(r, c) = in(r / factor, c / factor);
  return out;
}

void normalize_slice(RealGrid& img) {
  if (img.empty()) return;
  const double n = static_cast<double>(img.size());
  double mean = 0.0;
  for (double v : img.raw()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : img.raw()) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  if (sd < 1e-12) {
    for (double& v : img.raw()) v = 0.0;
    return;
  }
  for (double& v : img.raw()) v = (v - mean) / sd;
}

void window_clip(RealGrid& img, double lo, double hi) {
  if (lo > hi) throw DataError("window_clip: lo > hi");
  for (double& v : img.raw()) v = std::clamp(v, lo, hi);
}

void window_percentile_upper(RealGrid& img, double percentile) {
  if (img.empty()) return;
  if (percentile < 0.0 || percentile > 100.0)
    throw DataError("window_percentile_upper: percentile out of [0,100]");
  std::vector<double> sorted(img.raw());
  std::sort(sorted.begin(), sorted.end());
  const double idx = percentile / 100.0 * (sorted.size() - 1);
  const size_t i = static_cast<size_t>(idx);
  const double hi = sorted[std::min(i, sorted.size() - 1)];
  for (double& v : img.raw()) v = std::min(v, hi);
}

namespace {

template <typename T, typename Sampler>
Grid2D<T> rotate_impl(const Grid2D<T>& in, double angle_rad, Sampler sample) {
  Grid2D<T> out(in.rows(), in.cols(), T{});
  const double cr = (in.rows() - 1) / 2.0;
  const double cc = (in.cols() - 1) / 2.0;
  const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
  for (int r = 0; r < in.rows(); ++r) {
    for (int c = 0; c < in.cols(); ++c) {
      // inverse map: rotate the destination coordinate back into the source
      const double dr = r - cr, dc = c - cc;
      const double src_r = cr + ca * dr + sa * dc;
      const double src_c = cc - sa * dr + ca * dc;
      out(r, c) = sample(in, src_r, src_c);
    }
  }
  return out;
}

}  // namespace

RealGrid rotate_bilinear(const RealGrid& in, double angle_rad) {
  return rotate_impl<double>(in, angle_rad, [](const RealGrid& g, double r, double c) {
    if (r < 0 || c < 0 || r > g.rows() - 1 || c > g.cols() - 1) return 0.0;
    const int r0 = static_cast<int>(std::floor(r)), c0 = static_cast<int>(std::floor(c));
    const int r1 = std::min(r0 + 1, g.rows() - 1), c1 = std::min(c0 + 1, g.cols() - 1);
    const double fr = r - r0, fc = c - c0;
    return (1 - fr) * ((1 - fc) * g(r0, c0) + fc * g(r0, c1)) +
           fr * ((1 - fc) * g(r1, c0) + fc * g(r1, c1));
  });
}

MaskGrid rotate_nearest(const MaskGrid& in, double angle_rad) {
  return rotate_impl<std::uint8_t>(in, angle_rad,
                                   [](const MaskGrid& g, double r, double c) -> std::uint8_t {
    const int ri = static_cast<int>(std::lround(r)), ci = static_cast<int>(std::lround(c));
    if (ri < 0 || ci < 0 || ri >= g.rows() || ci >= g.cols()) return 0;
    return g(ri, ci) ? 1 : 0;
  });
}

}  // namespace sqpf
