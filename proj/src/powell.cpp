#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "kiri/solvers.hpp"

namespace kiri {

namespace {

struct LineResult {
  double value;
  bool ok;  // false when the budget ran out mid-search
};

// Golden-section minimization of f(x + a u) over the a-interval keeping x + a u
// inside the box. Moves x to the best point seen (including a = 0).
LineResult line_minimize(Tracker& tr, std::vector<double>& x, double fx, const std::vector<double>& u, double tol) {
  const Bounds b = tr.bounds();
  double alo = -std::numeric_limits<double>::infinity(), ahi = std::numeric_limits<double>::infinity();
  double umax = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (u[j] == 0.0) continue;
    umax = std::max(umax, std::abs(u[j]));
    const double a1 = (b.lo - x[j]) / u[j], a2 = (b.hi - x[j]) / u[j];
    alo = std::max(alo, std::min(a1, a2));
    ahi = std::min(ahi, std::max(a1, a2));
  }
  if (umax == 0.0 || !(ahi > alo)) return {fx, true};
  alo = std::min(alo, 0.0);
  ahi = std::max(ahi, 0.0);

  std::vector<double> p(x.size());
  double best_a = 0.0, best_f = fx;
  auto f_at = [&](double a) -> std::optional<double> {
    for (std::size_t j = 0; j < x.size(); ++j) p[j] = std::clamp(x[j] + a * u[j], b.lo, b.hi);
    const auto v = tr.eval(p);
    if (v && *v < best_f) {
      best_f = *v;
      best_a = a;
    }
    return v;
  };
  auto commit = [&] {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j] + best_a * u[j], b.lo, b.hi);
  };

  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = alo, hi = ahi;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  auto fc = f_at(c);
  auto fd = fc ? f_at(d) : std::nullopt;
  while (fc && fd && (hi - lo) * umax > tol) {
    if (*fc <= *fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = f_at(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = f_at(d);
    }
  }
  commit();
  return {best_f, fc && fd};
}

}  // namespace

// Powell's direction-set method; directions start as the coordinate axes.
SolverRun solve_powell(Problem& problem, const StopRule& stop, std::uint64_t seed, const PowellConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Tracker tr(problem, stop);
  const int n = tr.dim();
  const Bounds b = tr.bounds();
  const double tol = cfg.line_tol_fraction * stop.x_tol;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  std::vector<double> x(n);
  for (double& v : x) v = b.lo + b.width() * uni(rng);
  std::vector<std::vector<double>> dirs(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) dirs[i][i] = 1.0;

  std::string reason = "cap";
  auto f0 = tr.eval(x);
  double fx = f0 ? *f0 : std::numeric_limits<double>::infinity();
  bool budget = f0.has_value();
  std::vector<double> ext(n), newdir(n);
  while (budget) {
    const std::vector<double> x_start = x;
    const double f_start = fx;
    double biggest = 0.0;
    int big_idx = 0;
    for (int i = 0; i < n && budget; ++i) {
      const LineResult r = line_minimize(tr, x, fx, dirs[i], tol);
      budget = r.ok;
      if (fx - r.value > biggest) {
        biggest = fx - r.value;
        big_idx = i;
      }
      fx = r.value;
    }
    if (!budget) break;
    if (tr.end_iteration()) {
      reason = "tolerance";
      break;
    }

    double len = 0.0;
    for (int j = 0; j < n; ++j) {
      newdir[j] = x[j] - x_start[j];
      len = std::max(len, std::abs(newdir[j]));
      ext[j] = std::clamp(2.0 * x[j] - x_start[j], b.lo, b.hi);
    }
    if (len == 0.0) continue;
    const auto fe = tr.eval(ext);
    if (!fe) break;
    if (*fe < f_start) {
      const double t = 2.0 * (f_start - 2.0 * fx + *fe) * (f_start - fx - biggest) * (f_start - fx - biggest) -
                       biggest * (f_start - *fe) * (f_start - *fe);
      if (t < 0.0) {
        const LineResult r = line_minimize(tr, x, fx, newdir, tol);
        fx = r.value;
        if (!r.ok) break;
        dirs.erase(dirs.begin() + big_idx);
        dirs.push_back(newdir);
      }
    }
  }
  SolverRun run = tr.finish("powell", seed, reason);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

}  // namespace kiri
