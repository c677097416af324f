#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kiri/grid.hpp"

namespace kiri {

inline constexpr int kSobolMaxDim = 1024;

// Unscrambled base-2 Sobol sequence (Joe-Kuo direction numbers) in Gray-code
// order. Index 0 is the origin; index 1 is (0.5, ..., 0.5).
class SobolEngine {
 public:
  explicit SobolEngine(int dim, std::uint64_t first_index = 0);

  int dim() const { return dim_; }
  std::uint64_t index() const { return index_; }
  // Writes the point at index() into out (values in [0, 1)) and advances.
  void next(std::span<double> out);

 private:
  static constexpr int kBits = 52;
  int dim_;
  std::uint64_t index_;
  std::vector<std::uint64_t> dirs_;  // dim x kBits
  std::vector<std::uint64_t> state_;
};

// First index of an independent stream: each (seed, stream) pair owns a
// disjoint block of 2^24 consecutive indices, never touching the origin.
std::uint64_t sobol_stream_origin(std::uint64_t seed, int stream);

// `count` points mapped from [0,1]^dim to [-1,1]^dim.
std::vector<std::vector<double>> sobol_stream(int dim, int count, std::uint64_t seed, int stream = 0);

// x = 10^z elementwise. Throws DomainError unless every z is in [-1, 1].
RatioField z_to_ratio(const Field& z);

}  // namespace kiri
