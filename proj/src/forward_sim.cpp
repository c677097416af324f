#include "kiri/forward_sim.hpp"

#include <algorithm>

#include "kiri/errors.hpp"

namespace kiri {

Mask simulate(const Layout& layout, const RasterConfig& raster) {
  if (layout.feasibility.decode_failed) throw ContractError("simulate called on a failed decode");
  if (raster.width < 1 || raster.height < 1) throw ConfigError("raster size must be positive");
  Mask mask(raster.width, raster.height);
  if (layout.quads.empty()) return mask;

  Vec2 lo = layout.quads.front().p[0], hi = lo;
  for (const auto& q : layout.quads) {
    for (const Vec2& v : q.p) {
      lo = {std::min(lo.x, v.x), std::min(lo.y, v.y)};
      hi = {std::max(hi.x, v.x), std::max(hi.y, v.y)};
    }
  }
  const Vec2 mid{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)};
  const double extent = std::max(hi.x - lo.x, hi.y - lo.y);
  const double side = std::min(raster.width, raster.height);
  const double scale = extent > 0.0 ? raster.fill_fraction * side / extent : 1.0;
  const double cx = 0.5 * raster.width, cy = 0.5 * raster.height;

  mask.frame = Frame{scale, scale, cx - scale * mid.x, cy + scale * mid.y};
  for (const auto& q : layout.quads) {
    QuadVertices px;
    for (int k = 0; k < 4; ++k) {
      // Offsets from the midpoint first, so a rigid translation cancels.
      px[k] = {cx + scale * (q.p[k].x - mid.x), cy - scale * (q.p[k].y - mid.y)};
    }
    rasterize_pixel_quad(px, mask);
  }
  return mask;
}

}  // namespace kiri
