#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kiri/metrics.hpp"

namespace kiri {

struct Bounds {
  double lo = 0.1;
  double hi = 10.0;
  double width() const { return hi - lo; }
};

struct StopRule {
  double x_tol = 1e-3;
  double rel_obj_tol = 1e-3;
  int patience = 5;
  int max_evals = 1000;

  void validate() const;
};

struct Evaluation {
  double value = 0.0;  // minimized
  bool feasible = true;
  bool simulated = true;
  double siou = 0.0;
};

// Box-constrained minimization problem. Evaluation must be deterministic.
class Problem {
 public:
  virtual ~Problem() = default;
  virtual int dim() const = 0;
  virtual Bounds bounds() const = 0;
  virtual Evaluation evaluate(std::span<const double> x) = 0;
};

// Plain function over a box; every call counts as simulated and feasible.
class FunctionProblem : public Problem {
 public:
  FunctionProblem(int dim, Bounds bounds, std::function<double(std::span<const double>)> f)
      : dim_(dim), bounds_(bounds), f_(std::move(f)) {}
  int dim() const override { return dim_; }
  Bounds bounds() const override { return bounds_; }
  Evaluation evaluate(std::span<const double> x) override;

 private:
  int dim_;
  Bounds bounds_;
  std::function<double(std::span<const double>)> f_;
};

// Silhouette-matching objective: 1 - sIoU for feasible decodes, otherwise
// 1 + the feasibility penalty without running the simulator.
class InverseObjective : public Problem {
 public:
  // With log_space the search variable is u in [-1, 1] and x = 10^u.
  InverseObjective(Evaluator evaluator, GridShape shape, bool log_space = false);

  int dim() const override { return static_cast<int>(shape_.size()); }
  Bounds bounds() const override { return log_space_ ? Bounds{-1.0, 1.0} : Bounds{0.1, 10.0}; }
  Evaluation evaluate(std::span<const double> x) override;

  RatioField to_field(std::span<const double> x) const;
  const Evaluator& evaluator() const { return evaluator_; }

 private:
  Evaluator evaluator_;
  GridShape shape_;
  bool log_space_;
};

struct KeptCandidate {
  std::vector<double> x;
  double value = 0.0;
  double siou = 0.0;
};

struct TracePoint {
  int evals = 0;
  double best_value = 0.0;
};

struct SolverRun {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<double> best_x;
  double best_value = 0.0;
  double best_siou = 0.0;
  bool best_feasible = false;
  int evals = 0;       // budget consumed: every evaluation, feasible or not
  int sim_evals = 0;   // #F: evaluations that ran the forward simulator
  int first_iteration_sim_evals = 0;
  int first_iteration_evals = 0;
  std::vector<KeptCandidate> kept;
  std::vector<TracePoint> trace;  // best-so-far after each iteration
  std::string stop_reason;
  double seconds = 0.0;
};

inline constexpr std::size_t kKeptCapacity = 12;

// Budget, best-so-far, candidate retention and the tolerance stop rule shared by all solvers.
class Tracker {
 public:
  Tracker(Problem& problem, const StopRule& stop);

  Problem& problem() { return problem_; }
  Bounds bounds() const { return bounds_; }
  int dim() const { return dim_; }
  bool exhausted() const { return evals_ >= stop_.max_evals; }
  int remaining() const { return stop_.max_evals - evals_; }
  int evals() const { return evals_; }

  // Clamps into the box, evaluates and records. nullopt once the budget is spent.
  std::optional<double> eval(std::span<const double> x);

  // Closes one iteration; true when the tolerance rule has held for `patience` iterations.
  bool end_iteration();
  // Same, measuring progress of a caller-owned incumbent instead of the global best.
  bool end_iteration(std::span<const double> incumbent, double value);
  void reset_patience();
  // Restarts the stall count with `baseline` as the reference point of the next iteration.
  void reset_patience(std::span<const double> baseline, double value);

  double best_value() const { return best_value_; }
  const std::vector<double>& best_x() const { return best_x_; }

  SolverRun finish(std::string method, std::uint64_t seed, std::string reason) const;

 private:
  void keep(std::span<const double> x, const Evaluation& e);

  Problem& problem_;
  StopRule stop_;
  Bounds bounds_;
  int dim_;
  int evals_ = 0;
  int sim_evals_ = 0;
  int iterations_ = 0;
  int first_iter_evals_ = 0;
  int first_iter_sim_ = 0;
  int stall_ = 0;
  double best_value_;
  double best_siou_ = 0.0;
  bool best_feasible_ = false;
  std::vector<double> best_x_;
  std::vector<double> iter_start_x_;
  double iter_start_value_;
  std::vector<KeptCandidate> kept_;
  std::vector<TracePoint> trace_;
  std::vector<double> scratch_;
};

struct CmaesConfig {
  int population = 0;  // 0: 4 + floor(3 ln d)
  double sigma0_fraction = 0.3;
  int max_resamples = 10;
};

struct PsoConfig {
  int particles = 24;
  double inertia = 0.7;
  double c1 = 1.5;
  double c2 = 1.5;
};

struct RestartConfig {
  int restarts = 8;
  int batch = 10;
  double initial_step = 0.25;  // fraction of the box width
  double shrink = 0.5;
};

struct PowellConfig {
  // Golden-section stops once the bracket is below this fraction of x_tol.
  double line_tol_fraction = 0.25;
};

int cmaes_population(int dim);

SolverRun solve_cmaes(Problem& problem, const StopRule& stop, std::uint64_t seed, const CmaesConfig& cfg = {});
SolverRun solve_pso(Problem& problem, const StopRule& stop, std::uint64_t seed, const PsoConfig& cfg = {});
SolverRun solve_random_restart(Problem& problem, const StopRule& stop, std::uint64_t seed,
                               const RestartConfig& cfg = {});
SolverRun solve_powell(Problem& problem, const StopRule& stop, std::uint64_t seed, const PowellConfig& cfg = {});

enum class Method { Cmaes, Pso, RandomRestart, Powell };
Method parse_method(const std::string& name);
std::string method_name(Method m);
SolverRun solve(Method m, Problem& problem, const StopRule& stop, std::uint64_t seed);

struct BestOfK {
  SolverRun best;
  std::vector<SolverRun> runs;
  int total_evals = 0;
  int total_sim_evals = 0;
};

// Independent runs, one per seed; keeps the run with the highest final sIoU.
BestOfK best_of_k(Method m, Problem& problem, const StopRule& stop, std::span<const std::uint64_t> seeds);

// JSON line {method, seed, grid, target_id, siou, success, evals, sim_evals, seconds, stop_reason}.
std::string run_record_json(const SolverRun& run, GridShape grid, const std::string& target_id, double tau_siou);

}  // namespace kiri
