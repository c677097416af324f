#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kiri/metrics.hpp"

namespace kiri {

// Conditioning tuple (y, phi, B) handed to velocity fields.
struct Condition {
  const Mask* target = nullptr;
  double phi = kPi / 3.0;
  const BoundaryAnchors* anchors = nullptr;
};

using VelocityField = std::function<Field(const Field& xt, double t, const Condition& cond)>;

struct FlowPath {
  Field x0;
  Field x1;
  double t = 0.0;
  Field xt;               // (1 - t) x0 + t x1
  Field target_velocity;  // x1 - x0
};

FlowPath rectified_path(const Field& x0, const Field& x1, double t);

// ||v(xt, t, c) - (x1 - x0)||^2 on the rectified path.
double cfm_sample_loss(const VelocityField& v, const Field& x0, const Field& x1, double t, const Condition& cond);

inline constexpr std::size_t kMaxCouplingBatch = 512;

// Assignment perm minimizing sum_i ||base_i - data_perm[i]||^2 (exact, Hungarian method).
std::vector<int> ot_coupling(std::span<const Field> base, std::span<const Field> data,
                             std::size_t max_batch = kMaxCouplingBatch);
double coupling_cost(std::span<const Field> base, std::span<const Field> data, std::span<const int> perm);

// Minimum-cost perfect matching on a square cost matrix (row-major n x n); result[row] = column.
std::vector<int> solve_assignment(std::span<const double> cost, int n);

// Left-endpoint Euler steps at t = k / steps.
Field euler_integrate(const VelocityField& v, const Field& x0, const Condition& cond, int steps = 8);

inline constexpr double kGrpoEpsilon = 1e-8;
inline constexpr double kGrpoTemperature = 0.2;

// (r - mean) / (population std + eps).
std::vector<double> grpo_advantages(std::span<const double> rewards, double epsilon = kGrpoEpsilon);
// exp(A / T) normalized to mean one.
std::vector<double> grpo_weights(std::span<const double> advantages, double temperature = kGrpoTemperature);

// Independent Gaussian policy over log10 ratios; samples are clamped into [-1, 1] before decoding.
struct MeanFieldPolicy {
  Field mean_z;
  double noise_scale = 0.15;
  double learning_rate = 0.3;

  static MeanFieldPolicy centered(GridShape shape);
  Field sample(std::mt19937_64& rng) const;
  static RatioField to_ratio(const Field& z);
};

struct GrpoGroup {
  std::vector<Field> z;  // pre-clamp samples
  std::vector<RatioField> x;
  std::vector<EvalResult> results;
  std::vector<double> rewards;
  double mu = 0.0;
  double sigma = 0.0;
  std::vector<double> advantages;
  std::vector<double> weights;
  double temperature = kGrpoTemperature;
  double epsilon = kGrpoEpsilon;
};

// Fills mu, sigma, advantages and weights from rewards.
void score_group(GrpoGroup& group);

// mean_z += lr / G * sum_g w_g (z_g - mean_z).
MeanFieldPolicy grpo_update(const MeanFieldPolicy& policy, const GrpoGroup& group);

// Samples and scores G candidates; adds G to `calls`. Evaluator failures score -pen_fail.
GrpoGroup grpo_rollout(const MeanFieldPolicy& policy, const Evaluator& evaluator, int group_size,
                       std::mt19937_64& rng, std::uint64_t& calls, double temperature = kGrpoTemperature,
                       double epsilon = kGrpoEpsilon);

struct GrpoTraceRow {
  std::uint64_t call_count = 0;
  std::vector<double> rewards;
  double mean_reward = 0.0;
  double best_siou = 0.0;
  double tv_of_best = 0.0;
};

std::string trace_row_json(const GrpoTraceRow& row);

struct GrpoConfig {
  std::uint64_t calls = 2000;
  int group = 4;
  double temperature = kGrpoTemperature;
  double epsilon = kGrpoEpsilon;
  std::uint64_t seed = 0;
};

// Rollout/update loop until `calls` environment calls are spent.
std::vector<GrpoTraceRow> grpo_train(MeanFieldPolicy& policy, const Evaluator& evaluator, const GrpoConfig& cfg,
                                     const std::function<void(const GrpoTraceRow&)>& on_row = {});

}  // namespace kiri
