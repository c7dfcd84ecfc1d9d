#include "sqpf/pgm_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

namespace sqpf {

namespace {

void skip_pnm_whitespace(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

struct PnmHeader {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
};

PnmHeader read_pnm_header(std::istream& in, const std::filesystem::path& path) {
  PnmHeader h;
  in >> h.magic;
  skip_pnm_whitespace(in);
  in >> h.width;
  skip_pnm_whitespace(in);
  in >> h.height;
  skip_pnm_whitespace(in);
  in >> h.maxval;
  if (!in || h.width <= 0 || h.height <= 0 || h.maxval <= 0)
    throw DataError("malformed PNM header in " + path.string());
  in.get();  // single whitespace before raster
  return h;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  return in;
}

}  // namespace

void write_pgm8(const std::filesystem::path& path, const MaskGrid& img, std::uint8_t maxval) {
  auto out = open_out(path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n" << int(maxval) << "\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

MaskGrid read_pgm8(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto h = read_pnm_header(in, path);
  if (h.magic != "P5" || h.maxval > 255)
    throw DataError("expected 8-bit P5 PGM: " + path.string());
  MaskGrid img(h.height, h.width);
  in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!in) throw DataError("truncated PGM raster: " + path.string());
  return img;
}

void write_pgm16(const std::filesystem::path& path, const Grid2D<std::uint16_t>& img) {
  auto out = open_out(path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n65535\n";
  for (std::uint16_t v : img.raw()) {
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

Grid2D<std::uint16_t> read_pgm16(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto h = read_pnm_header(in, path);
  if (h.magic != "P5" || h.maxval <= 255)
    throw DataError("expected 16-bit P5 PGM: " + path.string());
  Grid2D<std::uint16_t> img(h.height, h.width);
  for (std::uint16_t& v : img.raw()) {
    unsigned char bytes[2];
    in.read(reinterpret_cast<char*>(bytes), 2);
    v = static_cast<std::uint16_t>((bytes[0] << 8) | bytes[1]);
  }
  if (!in) throw DataError("truncated PGM raster: " + path.string());
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  if (!img.r.same_shape(img.g) || !img.r.same_shape(img.b))
    throw DataError("write_ppm: channel shape mismatch");
  auto out = open_out(path);
  out << "P6\n" << img.r.cols() << " " << img.r.rows() << "\n255\n";
  for (int r = 0; r < img.r.rows(); ++r)
    for (int c = 0; c < img.r.cols(); ++c) {
      const char px[3] = {static_cast<char>(img.r(r, c)), static_cast<char>(img.g(r, c)),
                          static_cast<char>(img.b(r, c))};
      out.write(px, 3);
    }
  if (!out) throw DataError("write failed: " + path.string());
}

QuantizedSlice quantize_slice(const RealGrid& img) {
  QuantizedSlice q;
  q.samples = Grid2D<std::uint16_t>(img.rows(), img.cols());
  if (img.empty()) return q;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : img.raw()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  q.offset = lo;
  q.scale = (hi > lo) ? (hi - lo) / 65535.0 : 1.0;
  for (size_t i = 0; i < img.size(); ++i) {
    const double t = (img.raw()[i] - q.offset) / q.scale;
    q.samples.raw()[i] =
        static_cast<std::uint16_t>(std::clamp(std::lround(t), 0L, 65535L));
  }
  return q;
}

RealGrid dequantize_slice(const Grid2D<std::uint16_t>& samples, double scale, double offset) {
  RealGrid img(samples.rows(), samples.cols());
  for (size_t i = 0; i < samples.size(); ++i)
    img.raw()[i] = samples.raw()[i] * scale + offset;
  return img;
}

}  // namespace sqpf
