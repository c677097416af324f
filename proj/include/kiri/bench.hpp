#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kiri/solvers.hpp"

namespace kiri {

struct BenchRow {
  std::string run_id;
  int grid = 0;
  std::string method;
  std::string target;
  double seconds = 0.0;
  int evals = 0;
  int sim_evals = 0;
};

struct BenchConfig {
  std::vector<int> grids{6, 8, 10, 12, 14, 16, 18, 20, 22, 24};
  std::vector<Method> methods{Method::Cmaes, Method::Pso, Method::RandomRestart, Method::Powell};
  std::vector<std::string> targets{"heart", "circle", "hexagon"};
  std::uint64_t seed = 0;
  double phi = 1.0471975511965976;
  StopRule stop;
  std::string run_id = "run";

  void validate() const;
};

// One solver run per (grid, method, target); seconds cover the solve call only.
std::vector<BenchRow> grid_sweep_bench(const BenchConfig& cfg, const std::function<void(const BenchRow&)>& on_row = {});

std::string bench_csv_header();
std::string bench_csv_row(const BenchRow& row);

}  // namespace kiri
