#pragma once

#include <string>
#include <vector>

#include "kiri/raster.hpp"

namespace kiri {

// Built-in reference silhouettes: heart, circle, hexagon.
const std::vector<std::string>& builtin_target_names();
Mask builtin_target(const std::string& name, int width = 128, int height = 128);

// A built-in name or a path to a PGM mask.
Mask load_target(const std::string& name_or_path, int width = 128, int height = 128);

}  // namespace kiri
