#pragma once

#include <vector>

#include "kiri/dataset.hpp"

namespace kiri::testing {

// The first `count` feasible fields of a seeded Sobol stream.
inline std::vector<DatasetSample> feasible_samples(GridShape shape, int count, std::uint64_t seed = 1) {
  GenConfig cfg;
  cfg.shape = shape;
  cfg.seed = seed;
  cfg.threads = 1;
  return generate_split("train", count, cfg).samples;
}

inline RatioField feasible_field(GridShape shape, std::uint64_t seed = 1) {
  return feasible_samples(shape, 1, seed).front().x;
}

}  // namespace kiri::testing
