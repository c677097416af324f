#include "kiri/bench.hpp"

#include <chrono>
#include <cstdio>

#include "kiri/errors.hpp"
#include "kiri/targets.hpp"

namespace kiri {

void BenchConfig::validate() const {
  if (grids.empty() || methods.empty() || targets.empty()) throw ConfigError("bench needs grids, methods and targets");
  for (int g : grids) {
    if (g < 6 || g > 24) throw ConfigError("bench grid size " + std::to_string(g) + " outside 6..24");
  }
  stop.validate();
}

std::vector<BenchRow> grid_sweep_bench(const BenchConfig& cfg, const std::function<void(const BenchRow&)>& on_row) {
  cfg.validate();
  std::vector<Mask> masks;
  for (const auto& t : cfg.targets) masks.push_back(load_target(t));

  std::vector<BenchRow> rows;
  for (int g : cfg.grids) {
    for (Method m : cfg.methods) {
      for (std::size_t t = 0; t < cfg.targets.size(); ++t) {
        const GridShape shape(g, g);
        InverseObjective obj(Evaluator::for_target(masks[t], shape, cfg.phi), shape);
        const auto t0 = std::chrono::steady_clock::now();
        const SolverRun run = solve(m, obj, cfg.stop, cfg.seed);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        BenchRow row{cfg.run_id, g, method_name(m), cfg.targets[t], secs, run.evals, run.sim_evals};
        if (on_row) on_row(row);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::string bench_csv_header() { return "run_id,grid,method,target,seconds,evals,sim_evals"; }

std::string bench_csv_row(const BenchRow& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", r.seconds);
  return r.run_id + "," + std::to_string(r.grid) + "," + r.method + "," + r.target + "," + buf + "," +
         std::to_string(r.evals) + "," + std::to_string(r.sim_evals);
}

}  // namespace kiri
