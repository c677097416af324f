#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kiri/vec2.hpp"

namespace kiri {

// Model-to-pixel affine map: px = offset_x + scale_x * x, py = offset_y - scale_y * y.
// Pixel (row r, col c) has its center at (c + 0.5, r + 0.5); rows grow downward.
struct Frame {
  double scale_x = 1.0;
  double scale_y = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;

  Vec2 to_pixel(Vec2 p) const { return {offset_x + scale_x * p.x, offset_y - scale_y * p.y}; }
  bool operator==(const Frame&) const = default;
};

// Binary raster, one byte (0 or 1) per pixel, row-major.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;
  Frame frame;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  std::uint8_t at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col]; }
  void set(int row, int col, bool on = true) { bits[static_cast<std::size_t>(row) * width + col] = on ? 1 : 0; }
  std::size_t count() const;
  bool same_size(const Mask& o) const { return width == o.width && height == o.height; }
};

using QuadVertices = std::array<Vec2, 4>;

// Marks every pixel whose center lies inside the quad, or on an edge under the
// top-left tie rule. Never clears pixels. Degenerate quads are accepted.
void rasterize_quad(const QuadVertices& quad, const Frame& frame, Mask& mask);

// Same, with the quad already expressed in pixel coordinates.
void rasterize_pixel_quad(const QuadVertices& quad_px, Mask& mask);

// Even-odd fill of an arbitrary simple polygon given in pixel coordinates.
// Scalar only; used for reference shapes and test oracles.
void rasterize_polygon(std::span<const Vec2> polygon_px, Mask& mask);

// Raw IoU of two same-size masks; 1.0 when both are empty.
double mask_iou(const Mask& a, const Mask& b);

// Binary PGM (P5, maxval 255): 0 background, 255 foreground.
void write_pgm(const Mask& mask, const std::filesystem::path& path);
Mask read_pgm(const std::filesystem::path& path);

}  // namespace kiri
