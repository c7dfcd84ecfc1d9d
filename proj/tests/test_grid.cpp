#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "sqpf/image_ops.hpp"
#include "sqpf/pgm_io.hpp"
#include "test_util.hpp"

using namespace sqpf;
using sqpf_test::random_grid;
using sqpf_test::random_mask;
using sqpf_test::TempDir;

TEST_CASE("block_average preserves constant masks") {
  RealGrid ones(256, 256, 1.0);
  const RealGrid out = block_average(ones, 64, 64);
  for (double v : out.raw()) CHECK(v == 1.0);
}

TEST_CASE("block_average of a single positive pixel") {
  RealGrid m(4, 4, 0.0);
  m(1, 2) = 1.0;
  const RealGrid out = block_average(m, 1, 1);
  CHECK(out(0, 0) == doctest::Approx(1.0 / 16.0).epsilon(1e-12));
}

TEST_CASE("block_average of a checkerboard") {
  RealGrid m(4, 4, 0.0);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = (r + c) % 2 == 0 ? 1.0 : 0.0;
  const RealGrid out = block_average(m, 2, 2);
  for (double v : out.raw()) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("block_average scales total mass by the block size") {
  std::mt19937_64 rng(7);
  const RealGrid m = random_grid(32, 48, rng);
  const RealGrid out = block_average(m, 8, 12);
  CHECK(mask_mass(out) == doctest::Approx(mask_mass(m) / 16.0).epsilon(1e-12));
}

TEST_CASE("block_average is linear") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const RealGrid m1 = random_grid(16, 16, rng);
    const RealGrid m2 = random_grid(16, 16, rng);
    std::uniform_real_distribution<double> coeff(-2.0, 2.0);
    const double a = coeff(rng), b = coeff(rng);
    RealGrid combo(16, 16);
    for (size_t i = 0; i < combo.size(); ++i)
      combo.raw()[i] = a * m1.raw()[i] + b * m2.raw()[i];
    const RealGrid lhs = block_average(combo, 4, 4);
    const RealGrid d1 = block_average(m1, 4, 4);
    const RealGrid d2 = block_average(m2, 4, 4);
    for (size_t i = 0; i < lhs.size(); ++i)
      CHECK(lhs.raw()[i] == doctest::Approx(a * d1.raw()[i] + b * d2.raw()[i]).epsilon(1e-10));
  }
}

TEST_CASE("block_average rejects non-integral blocks") {
  RealGrid m(10, 10, 1.0);
  CHECK_THROWS_AS(block_average(m, 3, 3), DataError);
}

TEST_CASE("resize_bilinear keeps constants and hits requested shape") {
  RealGrid m(512, 512, 3.25);
  const RealGrid out = resize_bilinear(m, 256, 256);
  CHECK(out.rows() == 256);
  CHECK(out.cols() == 256);
  for (double v : out.raw()) CHECK(v == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("resize_nearest keeps masks binary") {
  std::mt19937_64 rng(3);
  const MaskGrid m = random_mask(37, 53, rng, 0.3);
  const MaskGrid out = resize_nearest(m, 256, 256);
  for (auto v : out.raw()) CHECK((v == 0 || v == 1));
}

TEST_CASE("normalize_slice yields zero mean unit variance") {
  std::mt19937_64 rng(5);
  RealGrid img = random_grid(64, 64, rng, -40.0, 300.0);
  normalize_slice(img);
  double mean = 0.0;
  for (double v : img.raw()) mean += v;
  mean /= static_cast<double>(img.size());
  double var = 0.0;
  for (double v : img.raw()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(img.size());
  CHECK(std::abs(mean) < 1e-12);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("normalize_slice zeroes constant slices") {
  RealGrid img(16, 16, 42.0);
  normalize_slice(img);
  for (double v : img.raw()) CHECK(v == 0.0);
}

TEST_CASE("window_clip clamps to the soft-tissue range") {
  RealGrid img(2, 2);
  img(0, 0) = -1000;
  img(0, 1) = 0;
  img(1, 0) = 200;
  img(1, 1) = 1500;
  window_clip(img, -125.0, 275.0);
  CHECK(img(0, 0) == -125.0);
  CHECK(img(0, 1) == 0.0);
  CHECK(img(1, 0) == 200.0);
  CHECK(img(1, 1) == 275.0);
}

TEST_CASE("flips are involutions") {
  std::mt19937_64 rng(9);
  const RealGrid img = random_grid(13, 17, rng);
  CHECK(flip_horizontal(flip_horizontal(img)) == img);
  CHECK(flip_vertical(flip_vertical(img)) == img);
}

TEST_CASE("rotation by zero is the identity away from borders") {
  std::mt19937_64 rng(13);
  const RealGrid img = random_grid(21, 21, rng);
  const RealGrid out = rotate_bilinear(img, 0.0);
  for (int r = 1; r < 20; ++r)
    for (int c = 1; c < 20; ++c) CHECK(out(r, c) == doctest::Approx(img(r, c)).epsilon(1e-12));
}

TEST_CASE("upsample_nearest replicates pixels") {
  MaskGrid m(2, 2, 0);
  m(0, 1) = 1;
  const MaskGrid out = upsample_nearest(m, 4);
  CHECK(out.rows() == 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) CHECK(out(r, c) == m(r / 4, c / 4));
}

TEST_CASE("pgm8 round trip") {
  TempDir dir("pgm8");
  std::mt19937_64 rng(17);
  MaskGrid img(9, 14);
  std::uniform_int_distribution<int> dist(0, 255);
  for (auto& v : img.raw()) v = static_cast<std::uint8_t>(dist(rng));
  const auto path = dir.path() / "img.pgm";
  write_pgm8(path, img);
  CHECK(read_pgm8(path) == img);
}

TEST_CASE("pgm16 round trip") {
  TempDir dir("pgm16");
  std::mt19937_64 rng(19);
  Grid2D<std::uint16_t> img(7, 5);
  std::uniform_int_distribution<int> dist(0, 65535);
  for (auto& v : img.raw()) v = static_cast<std::uint16_t>(dist(rng));
  const auto path = dir.path() / "img.pgm";
  write_pgm16(path, img);
  CHECK(read_pgm16(path) == img);
}

TEST_CASE("quantize/dequantize error is bounded by half a step") {
  std::mt19937_64 rng(23);
  const RealGrid img = random_grid(32, 32, rng, -3.0, 5.0);
  const QuantizedSlice q = quantize_slice(img);
  const RealGrid back = dequantize_slice(q.samples, q.scale, q.offset);
  for (size_t i = 0; i < img.size(); ++i)
    CHECK(std::abs(back.raw()[i] - img.raw()[i]) <= q.scale * 0.5 + 1e-12);
}

TEST_CASE("missing pgm file raises DataError") {
  CHECK_THROWS_AS(read_pgm8("/nonexistent/nowhere.pgm"), DataError);
}
