#include "kiri/sobol.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "kiri/errors.hpp"

namespace kiri {

namespace {
#include "sobol_table.inc"
}  // namespace

SobolEngine::SobolEngine(int dim, std::uint64_t first_index) : dim_(dim), index_(first_index) {
  if (dim < 1) throw ConfigError("Sobol dimension must be positive");
  if (dim > kSobolMaxDim) {
    throw ConfigError("Sobol dimension " + std::to_string(dim) + " exceeds the direction table (" +
                      std::to_string(kSobolMaxDim) + ")");
  }
  if (first_index >= (std::uint64_t{1} << kBits)) throw ConfigError("Sobol index out of range");

  dirs_.assign(static_cast<std::size_t>(dim) * kBits, 0);
  for (int j = 0; j < kBits; ++j) dirs_[j] = std::uint64_t{1} << (kBits - 1 - j);
  for (int d = 1; d < dim; ++d) {
    std::uint64_t* v = &dirs_[static_cast<std::size_t>(d) * kBits];
    const std::uint32_t p = kSobolPoly[d];
    const int deg = std::bit_width(p) - 1;
    for (int j = 0; j < deg; ++j) v[j] = std::uint64_t{kSobolVinit[d][j]} << (kBits - 1 - j);
    for (int j = deg; j < kBits; ++j) {
      std::uint64_t nv = v[j - deg] ^ (v[j - deg] >> deg);
      for (int k = 1; k < deg; ++k) {
        if ((p >> (deg - k)) & 1u) nv ^= v[j - k];
      }
      v[j] = nv;
    }
  }

  // Jump straight to first_index via its Gray code.
  state_.assign(static_cast<std::size_t>(dim), 0);
  const std::uint64_t gray = first_index ^ (first_index >> 1);
  for (int b = 0; b < kBits; ++b) {
    if (!((gray >> b) & 1u)) continue;
    for (int d = 0; d < dim; ++d) state_[d] ^= dirs_[static_cast<std::size_t>(d) * kBits + b];
  }
}

void SobolEngine::next(std::span<double> out) {
  if (out.size() != static_cast<std::size_t>(dim_)) throw ArgumentError("Sobol output size mismatch");
  constexpr double kScale = 1.0 / static_cast<double>(std::uint64_t{1} << kBits);
  for (int d = 0; d < dim_; ++d) out[d] = static_cast<double>(state_[d]) * kScale;
  const int c = std::countr_one(index_);
  if (c >= kBits) throw ConfigError("Sobol sequence exhausted");
  for (int d = 0; d < dim_; ++d) state_[d] ^= dirs_[static_cast<std::size_t>(d) * kBits + c];
  ++index_;
}

std::uint64_t sobol_stream_origin(std::uint64_t seed, int stream) {
  constexpr std::uint64_t kBlockBits = 24;
  constexpr std::uint64_t kBlocks = std::uint64_t{1} << 27;
  const std::uint64_t block = (seed * 3 + static_cast<std::uint64_t>(stream)) % kBlocks;
  return 1 + (block << kBlockBits);
}

std::vector<std::vector<double>> sobol_stream(int dim, int count, std::uint64_t seed, int stream) {
  if (count < 0) throw ArgumentError("negative Sobol count");
  SobolEngine eng(dim, sobol_stream_origin(seed, stream));
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(count), std::vector<double>(dim));
  for (auto& p : pts) {
    eng.next(p);
    for (double& v : p) v = 2.0 * v - 1.0;
  }
  return pts;
}

RatioField z_to_ratio(const Field& z) {
  Field x(z.shape());
  for (int i = 0; i < z.rows(); ++i) {
    for (int j = 0; j < z.cols(); ++j) {
      const double v = z(i, j);
      if (!(v >= -1.0 && v <= 1.0)) throw DomainError("log-ratio entry outside [-1, 1]");
      x(i, j) = std::pow(10.0, v);
    }
  }
  return RatioField(std::move(x));
}

}  // namespace kiri
