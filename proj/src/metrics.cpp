#include "kiri/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include "json.hpp"

#include "kiri/errors.hpp"
#include "kiri/simd.hpp"

namespace kiri {

Vec2 Similarity::apply(Vec2 p) const {
  const double c = scale * std::cos(theta), s = scale * std::sin(theta);
  return {(c * p.x - s * p.y) + translation.x, (s * p.x + c * p.y) + translation.y};
}

Similarity Similarity::inverse() const {
  Similarity inv;
  inv.scale = 1.0 / scale;
  inv.theta = -theta;
  const double c = inv.scale * std::cos(inv.theta), s = inv.scale * std::sin(inv.theta);
  inv.translation = {-(c * translation.x - s * translation.y), -(s * translation.x + c * translation.y)};
  return inv;
}

namespace {

struct PointSet {
  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t size() const { return xs.size(); }
  void push(double x, double y) {
    xs.push_back(x);
    ys.push_back(y);
  }
};

PointSet foreground_points(const Mask& m) {
  PointSet ps;
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (m.at(r, c)) ps.push(c + 0.5, r + 0.5);
    }
  }
  return ps;
}

// Foreground pixels with a 4-neighbor in the background or outside the image.
PointSet boundary_points(const Mask& m) {
  PointSet ps;
  auto bg = [&](int r, int c) { return r < 0 || c < 0 || r >= m.height || c >= m.width || !m.at(r, c); };
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (m.at(r, c) && (bg(r - 1, c) || bg(r + 1, c) || bg(r, c - 1) || bg(r, c + 1))) ps.push(c + 0.5, r + 0.5);
    }
  }
  return ps;
}

struct Moments {
  Vec2 centroid;
  double rms = 0.0;
  double axis_angle = 0.0;
  double anisotropy = 0.0;
};

Moments moments(const PointSet& ps) {
  Moments mo;
  const double n = static_cast<double>(ps.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    sx += ps.xs[i];
    sy += ps.ys[i];
  }
  mo.centroid = {sx / n, sy / n};
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double dx = ps.xs[i] - mo.centroid.x, dy = ps.ys[i] - mo.centroid.y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  mo.rms = std::sqrt((sxx + syy) / n);
  mo.axis_angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const double tr = sxx + syy;
  mo.anisotropy = tr > 0.0 ? std::sqrt((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy) / tr : 0.0;
  return mo;
}

simd::SimilarityCoeffs coeffs(const Similarity& t) {
  return {t.scale * std::cos(t.theta), t.scale * std::sin(t.theta), t.translation.x, t.translation.y};
}

// Pixel-center coordinates of every pixel of a w x h grid.
struct GridCenters {
  PointSet pts;
  GridCenters(int w, int h) {
    pts.xs.reserve(static_cast<std::size_t>(w) * h);
    pts.ys.reserve(static_cast<std::size_t>(w) * h);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) pts.push(c + 0.5, r + 0.5);
    }
  }
};

// Inclusive pixel bounds of the foreground; empty when r0 > r1.
struct Support {
  int r0, r1, c0, c1;
};

Support support_of(const Mask& m) {
  Support s{m.height, -1, m.width, -1};
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      s.r0 = std::min(s.r0, r);
      s.r1 = std::max(s.r1, r);
      s.c0 = std::min(s.c0, c);
      s.c1 = std::max(s.c1, c);
    }
  }
  return s;
}

Mask warp_with(const Mask& pred, const Support& sup, const Similarity& t, const GridCenters& grid, int w, int h,
               std::vector<double>& bx, std::vector<double>& by) {
  Mask out(w, h);
  if (sup.r0 > sup.r1) return out;
  // Only output pixels whose source lands within one pixel of the support can be set.
  double lo_x = INFINITY, lo_y = INFINITY, hi_x = -INFINITY, hi_y = -INFINITY;
  for (const Vec2 corner : {Vec2{sup.c0 - 0.5, sup.r0 - 0.5}, Vec2{sup.c1 + 1.5, sup.r0 - 0.5},
                            Vec2{sup.c0 - 0.5, sup.r1 + 1.5}, Vec2{sup.c1 + 1.5, sup.r1 + 1.5}}) {
    const Vec2 p = t.apply(corner);
    lo_x = std::min(lo_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_x = std::max(hi_x, p.x);
    hi_y = std::max(hi_y, p.y);
  }
  const int c0 = std::max(0, static_cast<int>(std::floor(lo_x)) - 2);
  const int c1 = std::min(w - 1, static_cast<int>(std::ceil(hi_x)) + 1);
  const int r0 = std::max(0, static_cast<int>(std::floor(lo_y)) - 2);
  const int r1 = std::min(h - 1, static_cast<int>(std::ceil(hi_y)) + 1);
  if (c0 > c1 || r0 > r1) return out;

  const Similarity inv = t.inverse();
  const auto span = static_cast<std::size_t>(c1 - c0 + 1);
  bx.resize(span);
  by.resize(span);
  // Bilinear interpolation of the 0/1 prediction, thresholded at one half.
  auto at = [&](int r, int c) -> double {
    return (r >= 0 && c >= 0 && r < pred.height && c < pred.width) ? pred.at(r, c) : 0.0;
  };
  for (int row = r0; row <= r1; ++row) {
    const std::size_t base = static_cast<std::size_t>(row) * w + c0;
    simd::kernels().transform_points(coeffs(inv), grid.pts.xs.data() + base, grid.pts.ys.data() + base, span,
                                     bx.data(), by.data());
    for (std::size_t k = 0; k < span; ++k) {
      const double fx = bx[k] - 0.5, fy = by[k] - 0.5;
      if (!(fx > -1.0 && fy > -1.0 && fx < pred.width && fy < pred.height)) continue;
      const double x0 = std::floor(fx), y0 = std::floor(fy);
      const double ax = fx - x0, ay = fy - y0;
      const int c = static_cast<int>(x0), r = static_cast<int>(y0);
      double q00, q01, q10, q11;
      if (r >= 0 && c >= 0 && r + 1 < pred.height && c + 1 < pred.width) {
        const std::uint8_t* p = pred.bits.data() + static_cast<std::size_t>(r) * pred.width + c;
        q00 = p[0];
        q01 = p[1];
        q10 = p[pred.width];
        q11 = p[pred.width + 1];
      } else {
        q00 = at(r, c);
        q01 = at(r, c + 1);
        q10 = at(r + 1, c);
        q11 = at(r + 1, c + 1);
      }
      // Uniform neighborhoods settle without the blend (a blend of ones stays above one half).
      const double sum = q00 + q01 + q10 + q11;
      if (sum == 0.0) continue;
      if (sum == 4.0) {
        out.bits[base + k] = 1;
        continue;
      }
      const double v = (1.0 - ay) * ((1.0 - ax) * q00 + ax * q01) + ay * ((1.0 - ax) * q10 + ax * q11);
      out.bits[base + k] = v > 0.5 ? 1 : 0;
    }
  }
  return out;
}

// Uniform buckets over target boundary points for nearest-neighbor queries.
class NearestIndex {
 public:
  NearestIndex(const PointSet& pts, int w, int h, int cell = 4)
      : pts_(pts), cell_(cell), gw_((w + cell - 1) / cell), gh_((h + cell - 1) / cell), buckets_(gw_ * gh_) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      buckets_[bucket(cell_of(pts.xs[i], gw_), cell_of(pts.ys[i], gh_))].push_back(i);
    }
  }

  std::size_t nearest(double x, double y) const {
    const int cx = cell_of(x, gw_), cy = cell_of(y, gh_);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    const int max_ring = std::max(gw_, gh_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      for (int gy = cy - ring; gy <= cy + ring; ++gy) {
        for (int gx = cx - ring; gx <= cx + ring; ++gx) {
          if (std::max(std::abs(gx - cx), std::abs(gy - cy)) != ring) continue;
          if (gx < 0 || gy < 0 || gx >= gw_ || gy >= gh_) continue;
          for (std::size_t i : buckets_[bucket(gx, gy)]) {
            const double dx = pts_.xs[i] - x, dy = pts_.ys[i] - y;
            const double d = dx * dx + dy * dy;
            if (d < best) {
              best = d;
              best_i = i;
            }
          }
        }
      }
      // Anything in ring k+1 is at least (k * cell) away from a clamped query cell.
      if (best < std::numeric_limits<double>::infinity()) {
        const double reach = ring * cell_;
        const double outside = out_of_grid_distance(x, y);
        if ((reach - outside) > 0.0 && (reach - outside) * (reach - outside) >= best) break;
      }
    }
    return best_i;
  }

 private:
  int cell_of(double v, int count) const {
    const double c = std::floor(v / cell_);
    return static_cast<int>(std::clamp(c, 0.0, static_cast<double>(count - 1)));
  }
  std::size_t bucket(int gx, int gy) const { return static_cast<std::size_t>(gy) * gw_ + gx; }
  double out_of_grid_distance(double x, double y) const {
    const double ox = std::max({0.0, -x, x - gw_ * cell_});
    const double oy = std::max({0.0, -y, y - gh_ * cell_});
    return std::hypot(ox, oy);
  }

  const PointSet& pts_;
  int cell_;
  int gw_, gh_;
  std::vector<std::vector<std::size_t>> buckets_;
};

// Closed-form similarity (rotation, isotropic scale, translation; no reflection)
// minimizing sum |T(src_i) - dst_i|^2.
Similarity procrustes(const PointSet& src, const PointSet& dst) {
  const double n = static_cast<double>(src.size());
  double mx = 0, my = 0, qx = 0, qy = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    mx += src.xs[i];
    my += src.ys[i];
    qx += dst.xs[i];
    qy += dst.ys[i];
  }
  mx /= n;
  my /= n;
  qx /= n;
  qy /= n;
  double a = 0, b = 0, ss = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double px = src.xs[i] - mx, py = src.ys[i] - my;
    const double dx = dst.xs[i] - qx, dy = dst.ys[i] - qy;
    a += px * dx + py * dy;
    b += px * dy - py * dx;
    ss += px * px + py * py;
  }
  Similarity t;
  t.theta = std::atan2(b, a);
  t.scale = ss > 0.0 ? std::hypot(a, b) / ss : 1.0;
  const double c = t.scale * std::cos(t.theta), s = t.scale * std::sin(t.theta);
  t.translation = {qx - (c * mx - s * my), qy - (s * mx + c * my)};
  return t;
}

Similarity from_moments(const Moments& p, const Moments& q, double theta) {
  Similarity t;
  t.scale = p.rms > 0.0 ? q.rms / p.rms : 1.0;
  t.theta = theta;
  const double c = t.scale * std::cos(theta), s = t.scale * std::sin(theta);
  t.translation = {q.centroid.x - (c * p.centroid.x - s * p.centroid.y),
                   q.centroid.y - (s * p.centroid.x + c * p.centroid.y)};
  return t;
}

}  // namespace

Mask warp_mask(const Mask& pred, const Similarity& t, int width, int height) {
  const GridCenters grid(width, height);
  std::vector<double> bx, by;
  return warp_with(pred, support_of(pred), t, grid, width, height, bx, by);
}

AlignmentResult align_silhouettes(const Mask& pred, const Mask& target, const AlignConfig& cfg) {
  if (!pred.same_size(target)) throw MetricError("prediction and target resolutions differ");
  const PointSet pred_fg = foreground_points(pred);
  const PointSet tgt_fg = foreground_points(target);
  if (pred_fg.size() == 0 || tgt_fg.size() == 0) throw MetricError("empty silhouette cannot be scored");

  const PointSet pred_bd = boundary_points(pred);
  const PointSet tgt_bd = boundary_points(target);
  const auto min_bd = static_cast<std::size_t>(cfg.min_boundary_points);

  AlignmentResult res;
  res.boundary_init = pred_bd.size() >= min_bd && tgt_bd.size() >= min_bd;
  const int w = target.width, h = target.height;
  const GridCenters grid(w, h);
  const Support sup = support_of(pred);
  std::vector<double> bx, by;
  auto score = [&](const Similarity& t) {
    const Mask warped = warp_with(pred, sup, t, grid, w, h, bx, by);
    return mask_iou(warped, target);
  };

  res.siou = -1.0;
  auto try_moments = [&](const Moments& mp, const Moments& mq) {
    // Axis alignment leaves a sign ambiguity; test both orientations.
    const double base = mq.axis_angle - mp.axis_angle;
    std::vector<double> angles{base, base + kPi};
    if (std::min(mp.anisotropy, mq.anisotropy) < cfg.isotropy_threshold) {
      for (int k = 1; k < cfg.sweep_rotations; ++k) angles.push_back(base + 2.0 * kPi * k / cfg.sweep_rotations);
    }
    for (double theta : angles) {
      const Similarity t = from_moments(mp, mq, theta);
      const double v = score(t);
      if (v > res.siou) {
        res.siou = v;
        res.transform = t;
      }
    }
  };
  if (res.boundary_init) try_moments(moments(pred_bd), moments(tgt_bd));
  // Area moments are far less sensitive to staircase edges on thin shapes.
  if (cfg.area_candidates || !res.boundary_init) try_moments(moments(pred_fg), moments(tgt_fg));

  if (cfg.refine_steps > 0 && tgt_bd.size() > 0) {
    const PointSet& src = pred_bd.size() > 0 ? pred_bd : pred_fg;
    const NearestIndex index(tgt_bd, w, h);
    PointSet moved, matched;
    moved.xs.resize(src.size());
    moved.ys.resize(src.size());
    Similarity current = res.transform;
    for (int step = 0; step < cfg.refine_steps; ++step) {
      simd::kernels().transform_points(coeffs(current), src.xs.data(), src.ys.data(), src.size(),
                                       moved.xs.data(), moved.ys.data());
      matched.xs.clear();
      matched.ys.clear();
      for (std::size_t i = 0; i < src.size(); ++i) {
        const std::size_t j = index.nearest(moved.xs[i], moved.ys[i]);
        matched.push(tgt_bd.xs[j], tgt_bd.ys[j]);
      }
      current = procrustes(src, matched);
      const double v = score(current);
      if (v > res.siou) {
        res.siou = v;
        res.transform = current;
        res.refined = true;
      } else if (step > 0) {
        break;
      }
    }
  }
  return res;
}

double siou(const Mask& pred, const Mask& target, const AlignConfig& align) {
  return align_silhouettes(pred, target, align).siou;
}

double total_variation(const Field& x) {
  double tv = 0.0;
  for (int i = 0; i + 1 < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) tv += std::abs(x(i + 1, j) - x(i, j));
  }
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j + 1 < x.cols(); ++j) tv += std::abs(x(i, j + 1) - x(i, j));
  }
  return tv;
}

RewardMode parse_reward_mode(const std::string& name) {
  if (name == "accuracy") return RewardMode::Accuracy;
  if (name == "regularity" || name == "regularity_only") return RewardMode::RegularityOnly;
  if (name == "hybrid") return RewardMode::Hybrid;
  throw ConfigError("unknown reward mode '" + name + "'");
}

std::string reward_mode_name(RewardMode mode) {
  switch (mode) {
    case RewardMode::Accuracy:
      return "accuracy";
    case RewardMode::RegularityOnly:
      return "regularity";
    case RewardMode::Hybrid:
      return "hybrid";
  }
  return "accuracy";
}

double reward(const RatioField& x, const FeasibilityReport& feas, std::optional<double> siou_value,
              const RewardConfig& cfg) {
  const bool feasible = check_feasible(feas, cfg.tau_ov);
  // A supplied sIoU is only meaningless when there is no geometry at all.
  if (siou_value && feas.decode_failed) throw ContractError("sIoU supplied for a failed decode");
  if (!siou_value && feasible) throw ContractError("feasible decode must be scored with its sIoU");

  const double penalties = cfg.pen_fail * (feas.decode_failed ? 1.0 : 0.0) +
                           cfg.pen_invalid * (feas.invalid_count > 0 ? 1.0 : 0.0) +
                           cfg.w_overlap * std::max(feas.overlap_ratio - cfg.tau_ov, 0.0);
  const double s = siou_value.value_or(0.0);
  const double tv = (cfg.mode == RewardMode::Accuracy && cfg.lambda_tv == 0.0) ? 0.0 : total_variation(x);
  switch (cfg.mode) {
    case RewardMode::Accuracy:
      return s - penalties - cfg.lambda_tv * tv;
    case RewardMode::RegularityOnly:
      return -penalties - cfg.lambda_tv * tv;
    case RewardMode::Hybrid:
      return 0.5 * s + 0.5 * std::exp(-tv / cfg.tv_ref) - penalties;
  }
  return s - penalties;
}

bool is_success(const EvalResult& r, const RewardConfig& cfg) {
  return r.siou >= cfg.tau_siou && check_feasible(r.feasibility, cfg.tau_ov);
}

std::string eval_record_json(const EvalResult& r) {
  nlohmann::json j{{"siou", r.siou},
                   {"tv", r.tv},
                   {"reward", r.reward},
                   {"success", r.success},
                   {"n_inv", r.feasibility.invalid_count},
                   {"r_ov", r.feasibility.overlap_ratio},
                   {"decode_failed", r.feasibility.decode_failed}};
  return j.dump();
}

Evaluator Evaluator::for_target(Mask target, GridShape shape, double phi) {
  Evaluator ev;
  ev.target = std::move(target);
  ev.phi = DeploymentParam(phi);
  ev.anchors = BoundaryAnchors::rectangular(shape);
  ev.raster.width = ev.target.width;
  ev.raster.height = ev.target.height;
  return ev;
}

EvalResult Evaluator::evaluate(const RatioField& x) const {
  EvalResult res;
  const Layout layout = march_decode(x, phi, anchors, feasibility);
  res.feasibility = layout.feasibility;
  res.tv = total_variation(x);
  std::optional<double> s;
  if (check_feasible(layout.feasibility, reward.tau_ov)) {
    const Mask pred = simulate(layout, raster);
    res.simulated = true;
    try {
      s = siou(pred, target, align);
    } catch (const MetricError&) {
      // Unscorable silhouettes count as a complete miss.
      s = 0.0;
    }
    res.siou = *s;
  }
  res.reward = kiri::reward(x, layout.feasibility, s, reward);
  res.success = is_success(res, reward);
  return res;
}

}  // namespace kiri
