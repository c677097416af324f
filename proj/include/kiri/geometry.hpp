#pragma once

#include <span>
#include <vector>

#include "kiri/grid.hpp"
#include "kiri/raster.hpp"
#include "kiri/vec2.hpp"

namespace kiri {

inline constexpr double kPi = 3.14159265358979323846;

// Global deployment angle phi, strictly inside (0, pi).
class DeploymentParam {
 public:
  explicit DeploymentParam(double phi);
  double value() const { return phi_; }

 private:
  double phi_;
};

// Vertices that seed the marching order: top[j-1] is p3 of cell (1, j) and
// left[i-1] is p0 of cell (i, 1). The top list carries one extra point that
// closes the frame corner.
struct BoundaryAnchors {
  std::vector<Vec2> top;
  std::vector<Vec2> left;
  double spacing = 1.0;

  // Top anchors at (j*d, 0) for j = 0..n and left anchors at (0, -i*d) for i = 1..m.
  static BoundaryAnchors rectangular(GridShape shape, double spacing = 1.0);
  bool fits(GridShape shape) const;
};

// Parallelogram void with vertices p[0..3] in counterclockwise index order.
struct VoidQuad {
  QuadVertices p{};

  double a() const { return norm(p[1] - p[0]); }
  double b() const { return norm(p[3] - p[0]); }
  double signed_area() const;
  double area() const;
};

struct FeasibilityConfig {
  double tau_ov = 0.02;
  int union_resolution = 256;
  double union_padding = 0.02;
  double eps_seed = 1e-9;
  double min_area = 1e-8;
  double min_side = 1e-8;
};

struct FeasibilityReport {
  int invalid_count = 0;
  double overlap_ratio = 0.0;
  bool decode_failed = false;
  Field per_void_area;
  double union_area = 0.0;
};

struct Layout {
  GridShape shape;
  std::vector<VoidQuad> quads;  // row-major, 0-based (i, j)
  FeasibilityReport feasibility;

  const VoidQuad& at(int i, int j) const { return quads[static_cast<std::size_t>(i) * shape.n + j]; }
};

// phi where (i + j) is even and pi - phi where odd, with 1-based (i, j).
Field checkerboard_angles(GridShape shape, DeploymentParam phi);

// Counterclockwise rotation by theta.
Vec2 rotate(double theta, Vec2 v);

// One step of the marching rule: given the seed vertices p0, p3 of a void, its
// ratio and local angle, returns the full parallelogram.
VoidQuad decode_cell(Vec2 p0, Vec2 p3, double ratio, double angle);

// Rebuilds the full layout left-to-right, top-to-bottom. Each cell reuses the
// left neighbor's p2 as p0 and the top neighbor's p1 as p3 (anchors on the
// boundary), then populates the feasibility report. Non-finite results set
// decode_failed instead of throwing.
Layout march_decode(const RatioField& x, DeploymentParam phi, const BoundaryAnchors& anchors,
                    const FeasibilityConfig& config = {});

// Collapsed (tiny area or side) or self-intersecting / reflex quad.
bool is_invalid_quad(const VoidQuad& quad, const FeasibilityConfig& config = {});

struct OverlapEstimate {
  double overlap_ratio = 0.0;
  double union_area = 0.0;
  double summed_area = 0.0;
};

// 1 - A_union / sum(A), with A_union counted on a resolution^2 raster over the
// padded bounding box of all quads.
OverlapEstimate estimate_overlap(std::span<const VoidQuad> quads, const FeasibilityConfig& config = {});

bool check_feasible(const FeasibilityReport& report, double tau_ov);
inline bool check_feasible(const Layout& layout, double tau_ov) { return check_feasible(layout.feasibility, tau_ov); }

}  // namespace kiri
