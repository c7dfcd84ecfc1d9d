#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqpf/errors.hpp"

namespace sqpf {

// Dense row-major 2D grid. The building block for slice images and masks.
template <typename T>
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw DataError("Grid2D: negative dimensions");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  template <typename U>
  bool same_shape(const Grid2D<U>& o) const { return rows_ == o.rows() && cols_ == o.cols(); }

  bool operator==(const Grid2D& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid2D<double>;
using MaskGrid = Grid2D<std::uint8_t>;

// Dense 3D scalar grid with x fastest (the NIfTI voxel order).
template <typename T>
class Volume3D {
 public:
  Volume3D() = default;
  Volume3D(int nx, int ny, int nz, T fill = T{})
      : nx_(nx), ny_(ny), nz_(nz),
        data_(static_cast<size_t>(nx) * ny * nz, fill) {
    if (nx < 0 || ny < 0 || nz < 0) throw DataError("Volume3D: negative dimensions");
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  size_t size() const { return data_.size(); }

  T& at(int x, int y, int z) {
    return data_[(static_cast<size_t>(z) * ny_ + y) * nx_ + x];
  }
  const T& at(int x, int y, int z) const {
    return data_[(static_cast<size_t>(z) * ny_ + y) * nx_ + x];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  template <typename U>
  bool same_shape(const Volume3D<U>& o) const {
    return nx_ == o.nx() && ny_ == o.ny() && nz_ == o.nz();
  }

  std::string shape_str() const {
    return std::to_string(nx_) + "x" + std::to_string(ny_) + "x" + std::to_string(nz_);
  }

 private:
  int nx_ = 0;
  int ny_ = 0;
  int nz_ = 0;
  std::vector<T> data_;
};

inline long long mask_area(const MaskGrid& m) {
  long long n = 0;
  for (auto v : m.raw()) n += (v != 0);
  return n;
}

inline double mask_mass(const RealGrid& m) {
  double s = 0.0;
  for (auto v : m.raw()) s += v;
  return s;
}

}  // namespace sqpf
