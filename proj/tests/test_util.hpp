#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sqpf/grid.hpp"
#include "sqpf/tensor.hpp"

namespace sqpf_test {

inline bool close(double a, double b, double rtol, double atol) {
  return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

inline sqpf::RealGrid random_grid(int rows, int cols, std::mt19937_64& rng, double lo = 0.0,
                                  double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  sqpf::RealGrid g(rows, cols);
  for (double& v : g.raw()) v = dist(rng);
  return g;
}

inline sqpf::MaskGrid random_mask(int rows, int cols, std::mt19937_64& rng, double p = 0.5,
                                  bool ensure_nonempty = true) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  sqpf::MaskGrid m(rows, cols, 0);
  for (auto& v : m.raw()) v = dist(rng) < p ? 1 : 0;
  if (ensure_nonempty && sqpf::mask_area(m) == 0) {
    std::uniform_int_distribution<int> rr(0, rows - 1), cc(0, cols - 1);
    m(rr(rng), cc(rng)) = 1;
  }
  return m;
}

inline sqpf::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo,
                                  double hi, bool requires_grad = false) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& e : v) e = dist(rng);
  return sqpf::Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

// Central finite differences of a scalar-valued rebuildable computation with
// respect to one leaf tensor coordinate.
inline double central_diff(const std::function<double()>& eval, sqpf::Tensor& leaf, size_t index,
                           double h = 1e-6) {
  const double saved = leaf.values()[index];
  const double step = h * std::max(1.0, std::abs(saved));
  leaf.values()[index] = saved + step;
  const double hi = eval();
  leaf.values()[index] = saved - step;
  const double lo = eval();
  leaf.values()[index] = saved;
  return (hi - lo) / (2.0 * step);
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path() /
                ("sqpf_test_" + tag + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(base);
    path_ = base;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

}  // namespace sqpf_test
