#include "kiri/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "kiri/errors.hpp"

namespace kiri {

void StopRule::validate() const {
  if (!(x_tol >= 0.0) || !(rel_obj_tol >= 0.0) || patience < 1 || max_evals < 1) {
    throw ConfigError("stop rule: tolerances must be nonnegative, patience and max_evals positive");
  }
}

Evaluation FunctionProblem::evaluate(std::span<const double> x) { return {f_(x), true, true, 0.0}; }

InverseObjective::InverseObjective(Evaluator evaluator, GridShape shape, bool log_space)
    : evaluator_(std::move(evaluator)), shape_(shape), log_space_(log_space) {
  if (!evaluator_.anchors.fits(shape)) throw ConfigError("evaluator anchors do not match the grid");
}

RatioField InverseObjective::to_field(std::span<const double> x) const {
  if (x.size() != shape_.size()) throw ArgumentError("candidate length does not match the grid");
  std::vector<double> v(x.begin(), x.end());
  if (log_space_) {
    for (double& e : v) e = std::pow(10.0, e);
  }
  return RatioField(shape_, std::move(v));
}

Evaluation InverseObjective::evaluate(std::span<const double> x) {
  const EvalResult r = evaluator_.evaluate(to_field(x));
  const RewardConfig& rc = evaluator_.reward;
  Evaluation e;
  e.simulated = r.simulated;
  e.feasible = check_feasible(r.feasibility, rc.tau_ov);
  e.siou = r.siou;
  if (e.feasible) {
    e.value = 1.0 - r.siou;
  } else {
    const FeasibilityReport& f = r.feasibility;
    e.value = 1.0 + rc.pen_fail * (f.decode_failed ? 1.0 : 0.0) + rc.pen_invalid * (f.invalid_count > 0 ? 1.0 : 0.0) +
              rc.w_overlap * std::max(f.overlap_ratio - rc.tau_ov, 0.0);
  }
  return e;
}

Tracker::Tracker(Problem& problem, const StopRule& stop)
    : problem_(problem),
      stop_(stop),
      bounds_(problem.bounds()),
      dim_(problem.dim()),
      best_value_(std::numeric_limits<double>::infinity()),
      iter_start_value_(std::numeric_limits<double>::infinity()) {
  stop_.validate();
  if (dim_ < 1) throw ArgumentError("problem dimension must be positive");
  scratch_.resize(dim_);
}

std::optional<double> Tracker::eval(std::span<const double> x) {
  if (exhausted()) return std::nullopt;
  for (int d = 0; d < dim_; ++d) scratch_[d] = std::clamp(x[d], bounds_.lo, bounds_.hi);
  const Evaluation e = problem_.evaluate(scratch_);
  ++evals_;
  if (e.simulated) ++sim_evals_;
  if (e.value < best_value_) {
    best_value_ = e.value;
    best_x_ = scratch_;
    best_siou_ = e.siou;
    best_feasible_ = e.feasible;
  }
  if (e.feasible) keep(scratch_, e);
  return e.value;
}

void Tracker::keep(std::span<const double> x, const Evaluation& e) {
  if (kept_.size() < kKeptCapacity) {
    kept_.push_back({{x.begin(), x.end()}, e.value, e.siou});
    return;
  }
  auto worst = std::max_element(kept_.begin(), kept_.end(),
                                [](const KeptCandidate& a, const KeptCandidate& b) { return a.value < b.value; });
  if (e.value < worst->value) *worst = {{x.begin(), x.end()}, e.value, e.siou};
}

bool Tracker::end_iteration() { return end_iteration(best_x_, best_value_); }

bool Tracker::end_iteration(std::span<const double> incumbent, double value) {
  ++iterations_;
  if (iterations_ == 1) {
    first_iter_evals_ = evals_;
    first_iter_sim_ = sim_evals_;
  }
  trace_.push_back({evals_, best_value_});
  bool small = false;
  if (std::isfinite(iter_start_value_) && iter_start_x_.size() == incumbent.size()) {
    double move = 0.0;
    for (std::size_t d = 0; d < incumbent.size(); ++d) move = std::max(move, std::abs(incumbent[d] - iter_start_x_[d]));
    const double denom = std::max(std::abs(iter_start_value_), 1e-12);
    const double rel = (iter_start_value_ - value) / denom;
    small = move < stop_.x_tol && rel < stop_.rel_obj_tol;
  }
  stall_ = small ? stall_ + 1 : 0;
  iter_start_x_.assign(incumbent.begin(), incumbent.end());
  iter_start_value_ = value;
  return stall_ >= stop_.patience;
}

void Tracker::reset_patience() {
  stall_ = 0;
  iter_start_x_.clear();
  iter_start_value_ = std::numeric_limits<double>::infinity();
}

void Tracker::reset_patience(std::span<const double> baseline, double value) {
  stall_ = 0;
  iter_start_x_.assign(baseline.begin(), baseline.end());
  iter_start_value_ = value;
}

SolverRun Tracker::finish(std::string method, std::uint64_t seed, std::string reason) const {
  SolverRun run;
  run.method = std::move(method);
  run.seed = seed;
  run.evals = evals_;
  run.sim_evals = sim_evals_;
  run.first_iteration_evals = iterations_ > 0 ? first_iter_evals_ : evals_;
  run.first_iteration_sim_evals = iterations_ > 0 ? first_iter_sim_ : sim_evals_;
  run.kept = kept_;
  std::sort(run.kept.begin(), run.kept.end(),
            [](const KeptCandidate& a, const KeptCandidate& b) { return a.value < b.value; });
  run.trace = trace_;
  run.stop_reason = std::move(reason);
  if (!run.kept.empty()) {
    const auto top = std::max_element(run.kept.begin(), run.kept.end(),
                                      [](const KeptCandidate& a, const KeptCandidate& b) { return a.siou < b.siou; });
    run.best_x = top->x;
    run.best_value = top->value;
    run.best_siou = top->siou;
    run.best_feasible = true;
  } else {
    run.best_x = best_x_;
    run.best_value = best_value_;
    run.best_siou = best_siou_;
    run.best_feasible = best_feasible_;
  }
  return run;
}

// Particle swarm with global-best topology and zero initial velocity.
SolverRun solve_pso(Problem& problem, const StopRule& stop, std::uint64_t seed, const PsoConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Tracker tr(problem, stop);
  const int d = tr.dim();
  const Bounds b = tr.bounds();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  const int np = cfg.particles;
  std::vector<std::vector<double>> pos(np, std::vector<double>(d)), vel(np, std::vector<double>(d, 0.0));
  for (auto& p : pos) {
    for (double& v : p) v = b.lo + b.width() * uni(rng);
  }
  auto pbest = pos;
  std::vector<double> pbest_val(np, std::numeric_limits<double>::infinity());
  std::vector<double> gbest;
  double gbest_val = std::numeric_limits<double>::infinity();

  std::string reason = "cap";
  for (bool first = true;; first = false) {
    if (!first) {
      for (int k = 0; k < np; ++k) {
        for (int j = 0; j < d; ++j) {
          const double r1 = uni(rng), r2 = uni(rng);
          vel[k][j] = cfg.inertia * vel[k][j] + cfg.c1 * r1 * (pbest[k][j] - pos[k][j]) +
                      cfg.c2 * r2 * (gbest[j] - pos[k][j]);
          pos[k][j] = std::clamp(pos[k][j] + vel[k][j], b.lo, b.hi);
        }
      }
    }
    bool out = false;
    for (int k = 0; k < np; ++k) {
      const auto v = tr.eval(pos[k]);
      if (!v) {
        out = true;
        break;
      }
      if (*v < pbest_val[k]) {
        pbest_val[k] = *v;
        pbest[k] = pos[k];
      }
      if (*v < gbest_val) {
        gbest_val = *v;
        gbest = pos[k];
      }
    }
    if (out) break;
    if (tr.end_iteration()) {
      reason = "tolerance";
      break;
    }
    if (tr.exhausted()) break;
  }
  SolverRun run = tr.finish("pso", seed, reason);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

// Elitist Gaussian local search from several random starts with a shrinking step.
SolverRun solve_random_restart(Problem& problem, const StopRule& stop, std::uint64_t seed, const RestartConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Tracker tr(problem, stop);
  const int d = tr.dim();
  const Bounds b = tr.bounds();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int per_restart = std::max(1, stop.max_evals / cfg.restarts);

  std::string reason = "restarts";
  std::vector<double> x(d), cand(d), batch_best(d);
  for (int r = 0; r < cfg.restarts && !tr.exhausted(); ++r) {
    const int budget_end = std::min(stop.max_evals, tr.evals() + per_restart);
    for (double& v : x) v = b.lo + b.width() * uni(rng);
    auto fx = tr.eval(x);
    if (!fx) break;
    tr.reset_patience(x, *fx);
    double step = cfg.initial_step;
    while (tr.evals() < budget_end) {
      double bb = std::numeric_limits<double>::infinity();
      for (int k = 0; k < cfg.batch && tr.evals() < budget_end; ++k) {
        for (int j = 0; j < d; ++j) cand[j] = std::clamp(x[j] + step * b.width() * gauss(rng), b.lo, b.hi);
        const auto v = tr.eval(cand);
        if (v && *v < bb) {
          bb = *v;
          batch_best = cand;
        }
      }
      if (bb < *fx) {
        fx = bb;
        x = batch_best;
      } else {
        step *= cfg.shrink;
      }
      if (tr.end_iteration(x, *fx)) break;
    }
  }
  if (tr.exhausted()) reason = "cap";
  SolverRun run = tr.finish("rrls", seed, reason);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

Method parse_method(const std::string& name) {
  if (name == "cmaes") return Method::Cmaes;
  if (name == "pso") return Method::Pso;
  if (name == "rrls" || name == "random_restart") return Method::RandomRestart;
  if (name == "powell") return Method::Powell;
  throw ConfigError("unknown method '" + name + "' (expected cmaes, pso, rrls or powell)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Cmaes:
      return "cmaes";
    case Method::Pso:
      return "pso";
    case Method::RandomRestart:
      return "rrls";
    case Method::Powell:
      return "powell";
  }
  return "cmaes";
}

SolverRun solve(Method m, Problem& problem, const StopRule& stop, std::uint64_t seed) {
  switch (m) {
    case Method::Cmaes:
      return solve_cmaes(problem, stop, seed);
    case Method::Pso:
      return solve_pso(problem, stop, seed);
    case Method::RandomRestart:
      return solve_random_restart(problem, stop, seed);
    case Method::Powell:
      return solve_powell(problem, stop, seed);
  }
  throw ConfigError("unknown method");
}

BestOfK best_of_k(Method m, Problem& problem, const StopRule& stop, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw ArgumentError("best-of-k needs at least one seed");
  BestOfK out;
  for (std::uint64_t s : seeds) {
    out.runs.push_back(solve(m, problem, stop, s));
    out.total_evals += out.runs.back().evals;
    out.total_sim_evals += out.runs.back().sim_evals;
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < out.runs.size(); ++k) {
    const SolverRun& a = out.runs[k];
    const SolverRun& c = out.runs[best];
    if (a.best_feasible > c.best_feasible || (a.best_feasible == c.best_feasible && a.best_siou > c.best_siou)) best = k;
  }
  out.best = out.runs[best];
  return out;
}

std::string run_record_json(const SolverRun& run, GridShape grid, const std::string& target_id, double tau_siou) {
  nlohmann::json j{{"method", run.method},
                   {"seed", run.seed},
                   {"grid", {grid.m, grid.n}},
                   {"target_id", target_id},
                   {"siou", run.best_siou},
                   {"success", run.best_feasible && run.best_siou >= tau_siou},
                   {"evals", run.evals},
                   {"sim_evals", run.sim_evals},
                   {"seconds", run.seconds},
                   {"stop_reason", run.stop_reason}};
  return j.dump();
}

}  // namespace kiri
