#include "kiri/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "kiri/errors.hpp"

namespace kiri {

RatioField::RatioField(Field values) : values_(std::move(values)) {
  for (double v : values_.values()) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("ratio field entries must be finite and positive");
  }
}

RatioField RatioField::constant(GridShape shape, double value) { return RatioField(Field(shape, value)); }

bool RatioField::in_box(double lo, double hi) const {
  return std::all_of(values().begin(), values().end(), [&](double v) { return v >= lo && v <= hi; });
}

DeploymentParam::DeploymentParam(double phi) : phi_(phi) {
  if (!(phi > 0.0 && phi < kPi)) throw DomainError("deployment parameter must lie in (0, pi)");
}

BoundaryAnchors BoundaryAnchors::rectangular(GridShape shape, double spacing) {
  if (!(spacing > 0.0)) throw ArgumentError("anchor spacing must be positive");
  BoundaryAnchors b;
  b.spacing = spacing;
  for (int j = 0; j <= shape.n; ++j) b.top.push_back({j * spacing, 0.0});
  for (int i = 1; i <= shape.m; ++i) b.left.push_back({0.0, -i * spacing});
  return b;
}

bool BoundaryAnchors::fits(GridShape shape) const {
  return top.size() >= static_cast<std::size_t>(shape.n) && left.size() >= static_cast<std::size_t>(shape.m);
}

double VoidQuad::signed_area() const {
  double s = 0.0;
  for (int k = 0; k < 4; ++k) s += cross(p[k], p[(k + 1) % 4]);
  return 0.5 * s;
}

double VoidQuad::area() const { return std::abs(signed_area()); }

Field checkerboard_angles(GridShape shape, DeploymentParam phi) {
  Field out(shape);
  for (int i = 0; i < shape.m; ++i) {
    for (int j = 0; j < shape.n; ++j) {
      // 0-based parity equals 1-based parity since both indices shift by one.
      out(i, j) = ((i + j) % 2 == 0) ? phi.value() : kPi - phi.value();
    }
  }
  return out;
}

Vec2 rotate(double theta, Vec2 v) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

VoidQuad decode_cell(Vec2 p0, Vec2 p3, double ratio, double angle) {
  const Vec2 seed = p3 - p0;
  const Vec2 side = ratio * rotate(-angle, seed);
  return VoidQuad{{p0, p0 + side, p3 + side, p3}};
}

bool is_invalid_quad(const VoidQuad& q, const FeasibilityConfig& cfg) {
  for (int k = 0; k < 4; ++k) {
    if (!(norm(q.p[(k + 1) % 4] - q.p[k]) >= cfg.min_side)) return true;
  }
  if (!(q.area() >= cfg.min_area)) return true;
  int pos = 0, neg = 0;
  for (int k = 0; k < 4; ++k) {
    const Vec2 e0 = q.p[(k + 1) % 4] - q.p[k];
    const Vec2 e1 = q.p[(k + 2) % 4] - q.p[(k + 1) % 4];
    const double c = cross(e0, e1);
    if (c > 0.0) ++pos;
    if (c < 0.0) ++neg;
  }
  return pos > 0 && neg > 0;
}

OverlapEstimate estimate_overlap(std::span<const VoidQuad> quads, const FeasibilityConfig& cfg) {
  OverlapEstimate est;
  if (quads.empty()) return est;
  Vec2 lo = quads.front().p[0], hi = lo;
  for (const auto& q : quads) {
    est.summed_area += q.area();
    for (const Vec2& v : q.p) {
      lo = {std::min(lo.x, v.x), std::min(lo.y, v.y)};
      hi = {std::max(hi.x, v.x), std::max(hi.y, v.y)};
    }
  }
  if (!(est.summed_area > 0.0)) return est;

  double w = hi.x - lo.x, h = hi.y - lo.y;
  // A degenerate extent still needs a nonzero cell size.
  const double ext = std::max(w, h);
  w = std::max(w, ext * 1e-9);
  h = std::max(h, ext * 1e-9);
  const double pad_x = cfg.union_padding * w, pad_y = cfg.union_padding * h;
  const double span_x = w + 2.0 * pad_x, span_y = h + 2.0 * pad_y;
  const int res = cfg.union_resolution;

  Mask mask(res, res);
  mask.frame.scale_x = res / span_x;
  mask.frame.scale_y = res / span_y;
  mask.frame.offset_x = -(lo.x - pad_x) * mask.frame.scale_x;
  mask.frame.offset_y = (hi.y + pad_y) * mask.frame.scale_y;
  for (const auto& q : quads) rasterize_quad(q.p, mask.frame, mask);

  const double pixel_area = (span_x / res) * (span_y / res);
  est.union_area = static_cast<double>(mask.count()) * pixel_area;
  est.overlap_ratio = std::clamp(1.0 - est.union_area / est.summed_area, 0.0, 1.0);
  return est;
}

Layout march_decode(const RatioField& x, DeploymentParam phi, const BoundaryAnchors& anchors,
                    const FeasibilityConfig& cfg) {
  const GridShape shape = x.shape();
  if (!anchors.fits(shape)) throw ArgumentError("boundary anchors do not cover the grid shape");
  const Field angles = checkerboard_angles(shape, phi);

  Layout layout;
  layout.shape = shape;
  layout.quads.resize(shape.size());
  auto& rep = layout.feasibility;
  rep.per_void_area = Field(shape);

  for (int i = 0; i < shape.m; ++i) {
    for (int j = 0; j < shape.n; ++j) {
      const Vec2 p0 = j > 0 ? layout.at(i, j - 1).p[2] : anchors.left[static_cast<std::size_t>(i)];
      const Vec2 p3 = i > 0 ? layout.at(i - 1, j).p[1] : anchors.top[static_cast<std::size_t>(j)];
      const Vec2 seed = p3 - p0;
      if (!is_finite(p0) || !is_finite(p3) || !(norm(seed) >= cfg.eps_seed)) {
        rep.decode_failed = true;
      }
      VoidQuad q = decode_cell(p0, p3, x(i, j), angles(i, j));
      for (const Vec2& v : q.p) {
        if (!is_finite(v)) rep.decode_failed = true;
      }
      layout.quads[static_cast<std::size_t>(i) * shape.n + j] = q;
    }
  }

  for (int i = 0; i < shape.m; ++i) {
    for (int j = 0; j < shape.n; ++j) {
      const VoidQuad& q = layout.at(i, j);
      rep.per_void_area(i, j) = q.area();
      if (is_invalid_quad(q, cfg)) ++rep.invalid_count;
    }
  }
  if (rep.decode_failed) {
    rep.overlap_ratio = 1.0;
    return layout;
  }
  const OverlapEstimate ov = estimate_overlap(layout.quads, cfg);
  rep.overlap_ratio = ov.overlap_ratio;
  rep.union_area = ov.union_area;
  return layout;
}

bool check_feasible(const FeasibilityReport& r, double tau_ov) {
  return !r.decode_failed && r.invalid_count == 0 && r.overlap_ratio <= tau_ov;
}

}  // namespace kiri
