#include "kiri/genmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "kiri/errors.hpp"
#include "kiri/sobol.hpp"

namespace kiri {

namespace {

void require_same_shape(const Field& a, const Field& b) {
  if (!(a.shape() == b.shape())) throw ArgumentError("field shapes differ");
}

bool all_finite(const Field& f) {
  return std::all_of(f.values().begin(), f.values().end(), [](double v) { return std::isfinite(v); });
}

double squared_distance(const Field& a, const Field& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.values()[k] - b.values()[k];
    s += d * d;
  }
  return s;
}

}  // namespace

FlowPath rectified_path(const Field& x0, const Field& x1, double t) {
  require_same_shape(x0, x1);
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("flow time outside [0, 1]");
  FlowPath p{x0, x1, t, Field(x0.shape()), Field(x0.shape())};
  for (std::size_t k = 0; k < x0.size(); ++k) {
    const double a = x0.values()[k], b = x1.values()[k];
    p.xt.storage()[k] = (1.0 - t) * a + t * b;
    p.target_velocity.storage()[k] = b - a;
  }
  // Exact endpoints regardless of rounding in the blend.
  if (t == 0.0) p.xt = x0;
  if (t == 1.0) p.xt = x1;
  return p;
}

double cfm_sample_loss(const VelocityField& v, const Field& x0, const Field& x1, double t, const Condition& cond) {
  const FlowPath p = rectified_path(x0, x1, t);
  const Field pred = v(p.xt, t, cond);
  require_same_shape(pred, x0);
  if (!all_finite(pred)) throw NumericError("velocity field returned a non-finite value", 0);
  return squared_distance(pred, p.target_velocity);
}

std::vector<int> solve_assignment(std::span<const double> cost, int n) {
  if (n < 0 || cost.size() != static_cast<std::size_t>(n) * n) throw ArgumentError("cost matrix must be n x n");
  // Shortest augmenting paths with row/column potentials (1-based internally).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assign(n);
  for (int j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

std::vector<int> ot_coupling(std::span<const Field> base, std::span<const Field> data, std::size_t max_batch) {
  if (base.size() != data.size()) throw ArgumentError("base and data batches differ in size");
  if (base.size() > max_batch) throw ArgumentError("coupling batch exceeds the configured limit");
  const int n = static_cast<int>(base.size());
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      require_same_shape(base[i], data[j]);
      cost[static_cast<std::size_t>(i) * n + j] = squared_distance(base[i], data[j]);
    }
  }
  return solve_assignment(cost, n);
}

double coupling_cost(std::span<const Field> base, std::span<const Field> data, std::span<const int> perm) {
  if (base.size() != data.size() || perm.size() != base.size()) throw ArgumentError("coupling size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) total += squared_distance(base[i], data[perm[i]]);
  return total;
}

Field euler_integrate(const VelocityField& v, const Field& x0, const Condition& cond, int steps) {
  if (steps < 1) throw ArgumentError("Euler integration needs at least one step");
  Field x = x0;
  const double h = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    const Field vel = v(x, static_cast<double>(k) / steps, cond);
    require_same_shape(vel, x);
    for (std::size_t e = 0; e < x.size(); ++e) x.storage()[e] += h * vel.values()[e];
    if (!all_finite(x)) throw NumericError("non-finite state during Euler integration", static_cast<std::size_t>(k));
  }
  return x;
}

std::vector<double> grpo_advantages(std::span<const double> rewards, double epsilon) {
  if (rewards.size() < 2) throw ArgumentError("a GRPO group needs at least two rewards");
  if (!(epsilon >= 0.0)) throw DomainError("epsilon must be nonnegative");
  const double g = static_cast<double>(rewards.size());
  const double mu = std::accumulate(rewards.begin(), rewards.end(), 0.0) / g;
  double var = 0.0;
  for (double r : rewards) var += (r - mu) * (r - mu);
  const double sigma = std::sqrt(var / g);
  std::vector<double> adv(rewards.size());
  const double denom = sigma + epsilon;
  for (std::size_t k = 0; k < rewards.size(); ++k) adv[k] = denom > 0.0 ? (rewards[k] - mu) / denom : 0.0;
  return adv;
}

std::vector<double> grpo_weights(std::span<const double> advantages, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("temperature must be positive");
  if (advantages.empty()) return {};
  const double amax = *std::max_element(advantages.begin(), advantages.end());
  std::vector<double> w(advantages.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = std::exp((advantages[k] - amax) / temperature);
    sum += w[k];
  }
  const double scale = static_cast<double>(w.size()) / sum;
  for (double& x : w) x *= scale;
  return w;
}

MeanFieldPolicy MeanFieldPolicy::centered(GridShape shape) {
  MeanFieldPolicy p;
  p.mean_z = Field(shape, 0.0);
  return p;
}

Field MeanFieldPolicy::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Field z(mean_z.shape());
  for (std::size_t k = 0; k < z.size(); ++k) z.storage()[k] = mean_z.values()[k] + noise_scale * gauss(rng);
  return z;
}

RatioField MeanFieldPolicy::to_ratio(const Field& z) {
  Field c(z.shape());
  for (std::size_t k = 0; k < z.size(); ++k) c.storage()[k] = std::clamp(z.values()[k], -1.0, 1.0);
  return z_to_ratio(c);
}

void score_group(GrpoGroup& g) {
  const double n = static_cast<double>(g.rewards.size());
  g.mu = std::accumulate(g.rewards.begin(), g.rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : g.rewards) var += (r - g.mu) * (r - g.mu);
  g.sigma = std::sqrt(var / n);
  g.advantages = grpo_advantages(g.rewards, g.epsilon);
  g.weights = grpo_weights(g.advantages, g.temperature);
}

MeanFieldPolicy grpo_update(const MeanFieldPolicy& policy, const GrpoGroup& group) {
  if (group.z.size() != group.weights.size() || group.z.empty()) throw ArgumentError("group is not scored");
  MeanFieldPolicy next = policy;
  const double scale = policy.learning_rate / static_cast<double>(group.z.size());
  for (std::size_t k = 0; k < policy.mean_z.size(); ++k) {
    double acc = 0.0;
    for (std::size_t g = 0; g < group.z.size(); ++g) acc += group.weights[g] * (group.z[g].values()[k] - policy.mean_z.values()[k]);
    next.mean_z.storage()[k] = policy.mean_z.values()[k] + scale * acc;
  }
  return next;
}

GrpoGroup grpo_rollout(const MeanFieldPolicy& policy, const Evaluator& evaluator, int group_size,
                       std::mt19937_64& rng, std::uint64_t& calls, double temperature, double epsilon) {
  if (group_size < 2) throw ArgumentError("GRPO group size must be at least 2");
  GrpoGroup g;
  g.temperature = temperature;
  g.epsilon = epsilon;
  for (int k = 0; k < group_size; ++k) {
    g.z.push_back(policy.sample(rng));
    g.x.push_back(MeanFieldPolicy::to_ratio(g.z.back()));
  }
  for (int k = 0; k < group_size; ++k) {
    EvalResult r;
    try {
      r = evaluator.evaluate(g.x[k]);
    } catch (const std::exception&) {
      r = EvalResult{};
      r.feasibility.decode_failed = true;
      r.reward = -evaluator.reward.pen_fail;
    }
    g.results.push_back(r);
    g.rewards.push_back(r.reward);
  }
  calls += static_cast<std::uint64_t>(group_size);
  score_group(g);
  return g;
}

std::string trace_row_json(const GrpoTraceRow& row) {
  return nlohmann::json{{"call_count", row.call_count},
                        {"rewards", row.rewards},
                        {"mean_reward", row.mean_reward},
                        {"best_siou", row.best_siou},
                        {"tv_of_best", row.tv_of_best}}
      .dump();
}

std::vector<GrpoTraceRow> grpo_train(MeanFieldPolicy& policy, const Evaluator& evaluator, const GrpoConfig& cfg,
                                     const std::function<void(const GrpoTraceRow&)>& on_row) {
  if (cfg.group < 2) throw ConfigError("GRPO group size must be at least 2");
  std::mt19937_64 rng(cfg.seed);
  std::uint64_t calls = 0;
  std::vector<GrpoTraceRow> trace;
  while (calls + static_cast<std::uint64_t>(cfg.group) <= cfg.calls) {
    const GrpoGroup g = grpo_rollout(policy, evaluator, cfg.group, rng, calls, cfg.temperature, cfg.epsilon);
    policy = grpo_update(policy, g);
    const auto best = static_cast<std::size_t>(std::max_element(g.rewards.begin(), g.rewards.end()) - g.rewards.begin());
    GrpoTraceRow row{calls, g.rewards, g.mu, g.results[best].siou, g.results[best].tv};
    if (on_row) on_row(row);
    trace.push_back(std::move(row));
  }
  return trace;
}

}  // namespace kiri
