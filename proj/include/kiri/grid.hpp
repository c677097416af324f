#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kiri/errors.hpp"

namespace kiri {

// Rows (m) by columns (n) of voids.
struct GridShape {
  int m = 10;
  int n = 10;

  GridShape() = default;
  GridShape(int rows, int cols) : m(rows), n(cols) {
    if (rows < 1 || cols < 1) throw ArgumentError("grid shape must be at least 1x1");
  }
  std::size_t size() const { return static_cast<std::size_t>(m) * static_cast<std::size_t>(n); }
  bool operator==(const GridShape&) const = default;
};

// Dense row-major m x n array.
template <class T>
class Grid2D {
 public:
  Grid2D() = default;
  explicit Grid2D(GridShape shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
  Grid2D(GridShape shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape_.size()) throw ArgumentError("grid value count does not match shape");
  }

  GridShape shape() const { return shape_; }
  int rows() const { return shape_.m; }
  int cols() const { return shape_.n; }
  std::size_t size() const { return data_.size(); }

  // 0-based indices.
  T& operator()(int i, int j) { return data_[index(i, j)]; }
  const T& operator()(int i, int j) const { return data_[index(i, j)]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool operator==(const Grid2D&) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_.n) + static_cast<std::size_t>(j);
  }

  GridShape shape_{};
  std::vector<T> data_;
};

using Field = Grid2D<double>;

// The m x n design matrix of side-length ratios a/b. Every entry is strictly positive.
class RatioField {
 public:
  RatioField() = default;
  explicit RatioField(Field values);
  RatioField(GridShape shape, std::vector<double> values) : RatioField(Field(shape, std::move(values))) {}
  static RatioField constant(GridShape shape, double value);

  GridShape shape() const { return values_.shape(); }
  double operator()(int i, int j) const { return values_(i, j); }
  const Field& field() const { return values_; }
  std::span<const double> values() const { return values_.values(); }
  bool in_box(double lo, double hi) const;

  bool operator==(const RatioField&) const = default;

 private:
  Field values_;
};

}  // namespace kiri
