#include "kiri/targets.hpp"

#include <cmath>
#include <filesystem>

#include "kiri/errors.hpp"
#include "kiri/geometry.hpp"

namespace kiri {

const std::vector<std::string>& builtin_target_names() {
  static const std::vector<std::string> names{"heart", "circle", "hexagon"};
  return names;
}

namespace {

// Unit-scale outline centered on the origin, y up.
std::vector<Vec2> outline(const std::string& name) {
  std::vector<Vec2> pts;
  if (name == "circle") {
    for (int k = 0; k < 256; ++k) {
      const double t = 2.0 * kPi * k / 256;
      pts.push_back({std::cos(t), std::sin(t)});
    }
  } else if (name == "hexagon") {
    for (int k = 0; k < 6; ++k) {
      const double t = kPi / 2.0 + 2.0 * kPi * k / 6;
      pts.push_back({std::cos(t), std::sin(t)});
    }
  } else if (name == "heart") {
    for (int k = 0; k < 256; ++k) {
      const double t = 2.0 * kPi * k / 256;
      const double s = std::sin(t);
      const double x = 16.0 * s * s * s;
      const double y = 13.0 * std::cos(t) - 5.0 * std::cos(2 * t) - 2.0 * std::cos(3 * t) - std::cos(4 * t);
      pts.push_back({x / 17.0, (y + 2.5) / 17.0});
    }
  } else {
    throw ConfigError("unknown built-in target '" + name + "'");
  }
  return pts;
}

}  // namespace

Mask builtin_target(const std::string& name, int width, int height) {
  if (width < 1 || height < 1) throw ConfigError("target resolution must be positive");
  const std::vector<Vec2> unit = outline(name);
  const double radius = 0.4 * std::min(width, height);
  std::vector<Vec2> px;
  px.reserve(unit.size());
  for (const Vec2& p : unit) px.push_back({0.5 * width + radius * p.x, 0.5 * height - radius * p.y});
  Mask m(width, height);
  rasterize_polygon(px, m);
  return m;
}

Mask load_target(const std::string& name_or_path, int width, int height) {
  for (const auto& n : builtin_target_names()) {
    if (n == name_or_path) return builtin_target(n, width, height);
  }
  if (!std::filesystem::exists(name_or_path)) throw ConfigError("no such target: " + name_or_path);
  return read_pgm(name_or_path);
}

}  // namespace kiri
