#pragma once

#include <optional>
#include <string>

#include "kiri/forward_sim.hpp"
#include "kiri/geometry.hpp"
#include "kiri/raster.hpp"

namespace kiri {

struct AlignConfig {
  // Boundary-point initialization needs at least this many boundary pixels in both masks.
  int min_boundary_points = 16;
  // Below this normalized eigenvalue gap the principal axis is unreliable and a
  // rotation sweep supplements the axis-based candidates.
  double isotropy_threshold = 0.05;
  int sweep_rotations = 24;
  // Nearest-neighbor Procrustes steps after initialization; stops once IoU stops improving.
  int refine_steps = 1;
  // Also try foreground-area moments alongside boundary moments and keep the better IoU.
  bool area_candidates = true;
};

// p -> scale * R(theta) * p + translation, in pixel-center coordinates.
struct Similarity {
  double scale = 1.0;
  double theta = 0.0;
  Vec2 translation{};

  Vec2 apply(Vec2 p) const;
  Similarity inverse() const;
};

struct AlignmentResult {
  double siou = 0.0;
  Similarity transform;
  bool boundary_init = false;
  bool refined = false;  // the refinement step improved on the initialization
};

// Procrustes-aligned silhouette IoU: similarity-aligns pred onto target and
// returns the IoU of the re-rasterized prediction with the target.
// Throws MetricError on empty foreground or size mismatch.
double siou(const Mask& pred, const Mask& target, const AlignConfig& align = {});
AlignmentResult align_silhouettes(const Mask& pred, const Mask& target, const AlignConfig& align = {});

// Resamples pred through the inverse of `t` onto the target grid (bilinear, thresholded at 0.5).
Mask warp_mask(const Mask& pred, const Similarity& t, int width, int height);

// Sum of absolute differences between vertical and horizontal neighbors.
double total_variation(const Field& x);
inline double total_variation(const RatioField& x) { return total_variation(x.field()); }

enum class RewardMode { Accuracy, RegularityOnly, Hybrid };
RewardMode parse_reward_mode(const std::string& name);
std::string reward_mode_name(RewardMode mode);

struct RewardConfig {
  double tau_ov = 0.02;
  double tau_siou = 0.85;
  double pen_fail = 5.0;
  double pen_invalid = 2.0;
  double w_overlap = 2.0;
  double lambda_tv = 0.0;
  double tv_ref = 1.0;  // hybrid mode: regularity term is exp(-TV / tv_ref)
  RewardMode mode = RewardMode::Accuracy;
};

// Penalized scalar reward. `siou_value` is required when the decode passed
// every feasibility check and rejected when the decode failed outright.
double reward(const RatioField& x, const FeasibilityReport& feas, std::optional<double> siou_value,
              const RewardConfig& cfg);

struct EvalResult {
  double siou = 0.0;  // 0 when the candidate was not simulated
  double tv = 0.0;
  double reward = 0.0;
  bool success = false;
  bool simulated = false;
  FeasibilityReport feasibility;
};

bool is_success(const EvalResult& result, const RewardConfig& cfg);

// JSON object {siou, tv, reward, success, n_inv, r_ov, decode_failed}.
std::string eval_record_json(const EvalResult& result);

// Decode -> feasibility -> (simulate -> sIoU) -> reward for one candidate field.
struct Evaluator {
  Mask target;
  DeploymentParam phi{kPi / 3.0};
  BoundaryAnchors anchors;
  FeasibilityConfig feasibility;
  RasterConfig raster;
  AlignConfig align;
  RewardConfig reward;

  static Evaluator for_target(Mask target, GridShape shape, double phi);
  EvalResult evaluate(const RatioField& x) const;
};

}  // namespace kiri
