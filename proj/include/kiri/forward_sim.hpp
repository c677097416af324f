#pragma once

#include "kiri/geometry.hpp"
#include "kiri/raster.hpp"

namespace kiri {

struct RasterConfig {
  int width = 128;
  int height = 128;
  // Larger bounding-box extent maps to this fraction of the smaller mask side.
  double fill_fraction = 0.9;
};

// Recenters the layout on its bounding-box midpoint, scales it isotropically
// and rasterizes the union of its quads. Throws ContractError when the layout
// failed to decode.
Mask simulate(const Layout& layout, const RasterConfig& raster = {});

}  // namespace kiri
