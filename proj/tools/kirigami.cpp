#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "kiri/bench.hpp"
#include "kiri/dataset.hpp"
#include "kiri/dxf.hpp"
#include "kiri/errors.hpp"
#include "kiri/genmodel.hpp"
#include "kiri/matrix_io.hpp"
#include "kiri/simd.hpp"
#include "kiri/solvers.hpp"
#include "kiri/targets.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kiri;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kStall = 3, kVerify = 4, kInfeasible = 5 };

class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Global {
  std::uint64_t seed = 0;
  std::string grid = "10x10";
  double phi = kPi / 3.0;
  int raster = 128;
  double tau_ov = 0.02;
  double tau_siou = 0.85;
  std::string profile = "full";
  std::string simd = "auto";
  std::string echo;

  bool desk() const { return profile == "desk"; }
};

GridShape parse_grid(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) {
      const int n = std::stoi(s);
      return GridShape(n, n);
    }
    return GridShape(std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1)));
  } catch (const std::logic_error&) {
    throw ConfigError("malformed grid '" + s + "' (expected MxN)");
  }
}

Evaluator make_evaluator(const Global& g, Mask target, GridShape shape) {
  if (target.width != g.raster || target.height != g.raster) {
    throw ConfigError("target is " + std::to_string(target.width) + "x" + std::to_string(target.height) +
                      " but the raster is " + std::to_string(g.raster));
  }
  Evaluator ev = Evaluator::for_target(std::move(target), shape, g.phi);
  ev.reward.tau_ov = g.tau_ov;
  ev.reward.tau_siou = g.tau_siou;
  ev.feasibility.tau_ov = g.tau_ov;
  return ev;
}

json global_json(const Global& g) {
  return json{{"seed", g.seed}, {"grid", g.grid},         {"phi", g.phi},
              {"raster", g.raster}, {"tau_ov", g.tau_ov}, {"tau_siou", g.tau_siou},
              {"profile", g.profile}, {"simd", simd::backend_name(simd::active_backend())}};
}

// JSON echo of every effective parameter plus a reloadable key=value copy.
void write_echo(const CLI::App& app, const CLI::App& sub, const Global& g, json params, const fs::path& path) {
  json j{{"version", kVersion}, {"subcommand", sub.get_name()}, {"global", global_json(g)}, {"params", std::move(params)}};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text(path, j.dump(2) + "\n");
  fs::path ini = path;
  ini.replace_extension(".ini");
  write_text(ini, app.config_to_str(false, false));
}

fs::path echo_path(const Global& g, const fs::path& fallback) { return g.echo.empty() ? fallback : fs::path(g.echo); }

// ---- gen ------------------------------------------------------------------

struct GenArgs {
  int count = -1;
  std::string split = "all";
  std::string out;
  int verify = 128;
};

int cmd_gen(const CLI::App& app, const CLI::App& sub, const Global& g, const GenArgs& a) {
  if (a.out.empty()) throw ConfigError("--out is required");
  GenConfig cfg;
  cfg.shape = parse_grid(g.grid);
  cfg.phi = g.phi;
  cfg.seed = g.seed;
  cfg.raster.width = cfg.raster.height = g.raster;
  cfg.feasibility.tau_ov = g.tau_ov;

  std::vector<std::pair<std::string, int>> plan;
  const int train = g.desk() ? 200 : 5000, held = g.desk() ? 20 : 500;
  if (a.split == "all") {
    plan = {{"train", a.count >= 0 ? a.count : train}, {"val", a.count >= 0 ? a.count : held},
            {"test", a.count >= 0 ? a.count : held}};
  } else {
    split_stream(a.split);
    plan = {{a.split, a.count >= 0 ? a.count : (a.split == "train" ? train : held)}};
  }

  const fs::path root(a.out);
  json counts = json::object();
  for (const auto& [s, n] : plan) counts[s] = n;
  write_echo(app, sub, g, {{"count", counts}, {"out", a.out}, {"verify", a.verify}, {"config_hash", config_hash(cfg)}},
             echo_path(g, root / "config.json"));

  std::vector<SplitResult> results;
  for (const auto& [s, n] : plan) {
    const auto t0 = std::chrono::steady_clock::now();
    SplitResult r = generate_split(s, n, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_split(r, root);
    std::printf("%-5s %6zu samples  %8llu candidates  acceptance %.2f%%  %.1fs\n", s.c_str(), r.samples.size(),
                static_cast<unsigned long long>(r.candidates), 100.0 * r.acceptance_rate, secs);
    results.push_back(std::move(r));
  }
  write_manifest(root, cfg, results);
  const VerifyReport rep = check_dataset(root, a.verify, g.seed);
  for (const auto& s : rep.splits) {
    std::printf("verify %-5s checked %4d  min IoU %.6f  failures %zu\n", s.split.c_str(), s.checked, s.min_iou,
                s.failures.size());
  }
  verify_dataset(root, a.verify, g.seed);
  return kOk;
}

// ---- solve ----------------------------------------------------------------

struct SolveArgs {
  std::string method = "cmaes";
  int k = 1;
  std::string dataset;
  std::string split = "test";
  std::vector<std::string> targets;
  int limit = -1;
  int max_evals = 1000;
  bool log_space = false;
  std::string out;
};

int cmd_solve(const CLI::App& app, const CLI::App& sub, const Global& g, const SolveArgs& a) {
  const Method method = parse_method(a.method);
  if (a.k < 1) throw ConfigError("--k must be at least 1");
  if (a.dataset.empty() == a.targets.empty()) throw ConfigError("give exactly one of --dataset or --targets");

  std::vector<std::pair<std::string, Mask>> targets;
  GridShape shape = parse_grid(g.grid);
  double phi = g.phi;
  if (!a.dataset.empty()) {
    if (!fs::is_directory(a.dataset)) throw ConfigError("no dataset at " + a.dataset);
    const Manifest man = read_manifest(a.dataset);
    const auto it = man.ids.find(a.split);
    if (it == man.ids.end()) throw ConfigError("dataset has no '" + a.split + "' split");
    shape = man.config.shape;
    phi = man.config.phi;
    const int limit = a.limit >= 0 ? a.limit : (g.desk() ? 20 : static_cast<int>(it->second.size()));
    for (int i = 0; i < limit && i < static_cast<int>(it->second.size()); ++i) {
      targets.emplace_back(it->second[i], load_sample(a.dataset, a.split, it->second[i]).y);
    }
  } else {
    for (const auto& t : a.targets) targets.emplace_back(t, load_target(t, g.raster, g.raster));
  }

  Global eff = g;
  eff.phi = phi;
  StopRule stop;
  stop.max_evals = a.max_evals;
  stop.validate();
  const fs::path out = a.out.empty() ? fs::path("solve_" + a.method + ".jsonl") : fs::path(a.out);
  write_echo(app, sub, eff,
             {{"method", a.method}, {"k", a.k}, {"dataset", a.dataset}, {"split", a.split}, {"targets", a.targets},
              {"limit", a.limit}, {"max_evals", a.max_evals}, {"log_space", a.log_space}, {"out", out.string()},
              {"grid_effective", {shape.m, shape.n}}},
             echo_path(g, fs::path(out.string() + ".config.json")));

  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream jsonl(out);
  if (!jsonl) throw IoError("cannot write " + out.string());
  std::vector<std::uint64_t> seeds(a.k);
  std::iota(seeds.begin(), seeds.end(), g.seed);

  double sum_siou = 0.0, sum_f = 0.0;
  int successes = 0;
  for (const auto& [id, mask] : targets) {
    InverseObjective obj(make_evaluator(eff, mask, shape), shape, a.log_space);
    const BestOfK res = best_of_k(method, obj, stop, seeds);
    const bool ok = res.best.best_feasible && res.best.best_siou >= g.tau_siou;
    json rec = json::parse(run_record_json(res.best, shape, id, g.tau_siou));
    rec["k"] = a.k;
    rec["total_evals"] = res.total_evals;
    rec["total_sim_evals"] = res.total_sim_evals;
    jsonl << rec.dump() << "\n";
    std::printf("%-24s sIoU %.4f  success %d  #F %5d\n", id.c_str(), res.best.best_siou, ok ? 1 : 0,
                res.total_sim_evals);
    sum_siou += res.best.best_siou;
    sum_f += res.total_sim_evals;
    successes += ok ? 1 : 0;
  }
  const double n = static_cast<double>(targets.size());
  std::printf("%s k=%d targets=%zu  mean sIoU %.2f  success %.1f%%  mean #F %.1f\n", a.method.c_str(), a.k,
              targets.size(), n > 0 ? 100.0 * sum_siou / n : 0.0, n > 0 ? 100.0 * successes / n : 0.0,
              n > 0 ? sum_f / n : 0.0);
  return kOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string target;
  bool report_tv = false;
  std::string mode = "accuracy";
  double lambda_tv = 0.0;
};

int cmd_eval(const CLI::App& app, const CLI::App& sub, const Global& g, const EvalArgs& a) {
  if (a.pred.empty() || a.target.empty()) throw ConfigError("--pred and --target are required");
  const Mask target = load_target(a.target, g.raster, g.raster);
  write_echo(app, sub, g,
             {{"pred", a.pred}, {"target", a.target}, {"report_tv", a.report_tv}, {"mode", a.mode},
              {"lambda_tv", a.lambda_tv}},
             echo_path(g, fs::path(a.pred + ".eval.config.json")));
  json rec;
  const std::string ext = fs::path(a.pred).extension().string();
  if (ext == ".pgm") {
    const Mask pred = read_pgm(a.pred);
    if (!pred.same_size(target)) throw ConfigError("prediction and target resolutions differ");
    rec = {{"siou", siou(pred, target)}};
  } else {
    const RatioField x(read_matrix(a.pred));
    Evaluator ev = make_evaluator(g, target, x.shape());
    ev.reward.mode = parse_reward_mode(a.mode);
    ev.reward.lambda_tv = a.lambda_tv;
    rec = json::parse(eval_record_json(ev.evaluate(x)));
    if (!a.report_tv) rec.erase("tv");
  }
  std::cout << rec.dump() << "\n";
  return kOk;
}

// ---- grpo -----------------------------------------------------------------

struct GrpoArgs {
  std::string mode = "accuracy";
  long long calls = -1;
  int group = 4;
  double temp = kGrpoTemperature;
  std::string target;
  std::string dataset;
  int index = 0;
  double lambda_tv = -1.0;
  double noise = 0.15;
  double lr = 0.3;
  std::string out;
};

int cmd_grpo(const CLI::App& app, const CLI::App& sub, const Global& g, const GrpoArgs& a) {
  const RewardMode mode = parse_reward_mode(a.mode);
  if (a.out.empty()) throw ConfigError("--out is required");
  if (a.group < 2) throw ConfigError("--group must be at least 2");
  if (!(a.temp > 0.0)) throw ConfigError("--temp must be positive");
  GridShape shape = parse_grid(g.grid);
  Global eff = g;
  Mask target;
  std::string target_id = a.target;
  if (!a.dataset.empty()) {
    const Manifest man = read_manifest(a.dataset);
    const auto& ids = man.ids.at("test");
    if (a.index < 0 || a.index >= static_cast<int>(ids.size())) throw ConfigError("--index outside the test split");
    target = load_sample(a.dataset, "test", ids[a.index]).y;
    target_id = ids[a.index];
    shape = man.config.shape;
    eff.phi = man.config.phi;
  } else if (!a.target.empty()) {
    target = load_target(a.target, g.raster, g.raster);
  } else {
    throw ConfigError("give --target or --dataset");
  }

  GrpoConfig cfg;
  cfg.calls = a.calls >= 0 ? static_cast<std::uint64_t>(a.calls) : (g.desk() ? 2000 : 10000);
  cfg.group = a.group;
  cfg.temperature = a.temp;
  cfg.seed = g.seed;
  Evaluator ev = make_evaluator(eff, target, shape);
  ev.reward.mode = mode;
  ev.reward.lambda_tv = a.lambda_tv >= 0.0 ? a.lambda_tv : (mode == RewardMode::RegularityOnly ? 0.01 : 0.0);

  const fs::path root(a.out);
  fs::create_directories(root);
  write_echo(app, sub, eff,
             {{"mode", reward_mode_name(mode)}, {"calls", cfg.calls}, {"group", cfg.group}, {"temp", cfg.temperature},
              {"target", target_id}, {"lambda_tv", ev.reward.lambda_tv}, {"noise", a.noise}, {"lr", a.lr},
              {"grid_effective", {shape.m, shape.n}}, {"out", a.out}},
             echo_path(g, root / "config.json"));

  MeanFieldPolicy policy = MeanFieldPolicy::centered(shape);
  policy.noise_scale = a.noise;
  policy.learning_rate = a.lr;
  std::ofstream trace(root / "trace.jsonl");
  if (!trace) throw IoError("cannot write trace in " + root.string());
  std::size_t groups = 0;
  const auto rows = grpo_train(policy, ev, cfg, [&](const GrpoTraceRow& r) {
    trace << trace_row_json(r) << "\n";
    ++groups;
  });
  write_matrix(policy.mean_z, root / "policy.txt");

  const std::size_t dec = std::max<std::size_t>(1, rows.size() / 10);
  auto mean_of = [&](std::size_t lo, std::size_t hi, auto field) {
    double s = 0.0;
    for (std::size_t k = lo; k < hi; ++k) s += field(rows[k]);
    return hi > lo ? s / static_cast<double>(hi - lo) : 0.0;
  };
  auto reward_of = [](const GrpoTraceRow& r) { return r.mean_reward; };
  auto tv_of = [](const GrpoTraceRow& r) { return r.tv_of_best; };
  auto siou_of = [](const GrpoTraceRow& r) { return r.best_siou; };
  if (!rows.empty()) {
    std::printf("groups %zu  calls %llu\n", groups, static_cast<unsigned long long>(rows.back().call_count));
    std::printf("first decile: mean reward %.4f  best sIoU %.4f  TV(best) %.4f\n", mean_of(0, dec, reward_of),
                mean_of(0, dec, siou_of), mean_of(0, dec, tv_of));
    std::printf("last decile:  mean reward %.4f  best sIoU %.4f  TV(best) %.4f\n",
                mean_of(rows.size() - dec, rows.size(), reward_of), mean_of(rows.size() - dec, rows.size(), siou_of),
                mean_of(rows.size() - dec, rows.size(), tv_of));
  }
  return kOk;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::vector<int> grids{6, 8, 10, 12, 14, 16, 18, 20, 22, 24};
  std::vector<std::string> methods{"cmaes", "pso", "rrls", "powell"};
  std::vector<std::string> targets{"heart", "circle", "hexagon"};
  std::string run_id;
  int max_evals = 1000;
  std::string out = "bench.csv";
};

int cmd_bench(const CLI::App& app, const CLI::App& sub, const Global& g, const BenchArgs& a) {
  BenchConfig cfg;
  cfg.grids = a.grids;
  cfg.methods.clear();
  for (const auto& m : a.methods) cfg.methods.push_back(parse_method(m));
  cfg.targets = a.targets;
  cfg.seed = g.seed;
  cfg.phi = g.phi;
  cfg.stop.max_evals = a.max_evals;
  cfg.run_id = a.run_id.empty()
                   ? std::to_string(std::chrono::duration_cast<std::chrono::seconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count())
                   : a.run_id;
  cfg.validate();

  const fs::path out(a.out);
  write_echo(app, sub, g,
             {{"grids", a.grids}, {"methods", a.methods}, {"targets", a.targets}, {"run_id", cfg.run_id},
              {"max_evals", a.max_evals}, {"out", a.out}},
             echo_path(g, fs::path(a.out + ".config.json")));
  const bool fresh = !fs::exists(out) || fs::file_size(out) == 0;
  std::ofstream csv(out, std::ios::app);
  if (!csv) throw IoError("cannot write " + out.string());
  if (fresh) csv << bench_csv_header() << "\n";
  grid_sweep_bench(cfg, [&](const BenchRow& r) {
    csv << bench_csv_row(r) << "\n";
    csv.flush();
    std::printf("%s\n", bench_csv_row(r).c_str());
  });
  return kOk;
}

// ---- export ---------------------------------------------------------------

struct ExportArgs {
  std::string field;
  double scale_mm = 1.0;
  double fit_mm = 0.0;
  double connector_radius = -1.0;
  std::string out;
};

int cmd_export(const CLI::App& app, const CLI::App& sub, const Global& g, const ExportArgs& a) {
  if (a.field.empty() || a.out.empty()) throw ConfigError("--field and --out are required");
  const RatioField x(read_matrix(a.field));
  FeasibilityConfig fc;
  fc.tau_ov = g.tau_ov;
  const Layout layout = march_decode(x, DeploymentParam(g.phi), BoundaryAnchors::rectangular(x.shape()), fc);
  write_echo(app, sub, g,
             {{"field", a.field}, {"scale_mm", a.scale_mm}, {"fit_mm", a.fit_mm},
              {"connector_radius", a.connector_radius}, {"out", a.out}},
             echo_path(g, fs::path(a.out + ".config.json")));
  if (!check_feasible(layout, g.tau_ov)) {
    const auto& f = layout.feasibility;
    throw Infeasible("field does not decode feasibly (decode_failed=" + std::to_string(f.decode_failed) +
                     ", N_inv=" + std::to_string(f.invalid_count) + ", r_ov=" + std::to_string(f.overlap_ratio) + ")");
  }
  ConnectorConfig cc;
  if (a.connector_radius >= 0.0) cc.radius = a.connector_radius;
  const CutPlan plan = plan_cuts(layout, cc);

  double scale = a.scale_mm;
  if (a.fit_mm > 0.0) {
    double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x, lo_y = lo_x, hi_y = -lo_x;
    for (const auto& q : layout.quads) {
      for (const Vec2& v : q.p) {
        lo_x = std::min(lo_x, v.x);
        hi_x = std::max(hi_x, v.x);
        lo_y = std::min(lo_y, v.y);
        hi_y = std::max(hi_y, v.y);
      }
    }
    scale = a.fit_mm / std::max(hi_x - lo_x, hi_y - lo_y);
  }
  write_dxf(plan, scale, a.out);
  std::printf("wrote %s: %zu cut paths, %zu connectors, scale %.6g mm/unit\n", a.out.c_str(), plan.paths.size(),
              plan.connectors.size(), scale);
  return kOk;
}

// ---- targets --------------------------------------------------------------

int cmd_targets(const Global& g, const std::string& out) {
  fs::create_directories(out);
  for (const auto& name : builtin_target_names()) {
    const fs::path p = fs::path(out) / (name + ".pgm");
    write_pgm(builtin_target(name, g.raster, g.raster), p);
    std::printf("%s\n", p.string().c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse design of quad kirigami from target silhouettes"};
  app.set_version_flag("--version", std::string("kirigami ") + kVersion);
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.require_subcommand(1);

  Global g;
  app.add_option("--seed", g.seed, "Global seed")->capture_default_str();
  app.add_option("--grid", g.grid, "Void grid MxN")->capture_default_str();
  app.add_option("--phi", g.phi, "Deployment angle in radians, inside (0, pi)")->capture_default_str();
  app.add_option("--raster", g.raster, "Square mask resolution")->capture_default_str();
  app.add_option("--tau-ov", g.tau_ov, "Overlap tolerance")->capture_default_str();
  app.add_option("--tau-siou", g.tau_siou, "Success threshold on sIoU")->capture_default_str();
  app.add_option("--profile", g.profile, "full or desk (smaller default counts)")
      ->check(CLI::IsMember({"full", "desk"}))
      ->capture_default_str();
  app.add_option("--simd", g.simd, "Kernel backend: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}))
      ->capture_default_str();
  app.add_option("--echo", g.echo, "Config echo path (defaults next to the outputs)");

  GenArgs gen;
  auto* s_gen = app.add_subcommand("gen", "Generate a Sobol dataset split and verify it");
  s_gen->add_option("--count", gen.count, "Samples per split (default from the profile)");
  s_gen->add_option("--split", gen.split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  s_gen->add_option("--out", gen.out, "Dataset directory");
  s_gen->add_option("--verify", gen.verify, "Samples re-rendered per split")->capture_default_str();

  SolveArgs sol;
  auto* s_solve = app.add_subcommand("solve", "Run a solver baseline against dataset or built-in targets");
  s_solve->add_option("--method", sol.method, "cmaes, pso, rrls or powell")->capture_default_str();
  s_solve->add_option("--k", sol.k, "Independent runs per target (best kept)")->capture_default_str();
  s_solve->add_option("--dataset", sol.dataset, "Dataset directory");
  s_solve->add_option("--split", sol.split, "Dataset split to solve")->capture_default_str();
  s_solve->add_option("--targets", sol.targets, "Built-in names or PGM paths")->delimiter(',');
  s_solve->add_option("--limit", sol.limit, "Number of dataset targets (desk profile: 20)");
  s_solve->add_option("--max-evals", sol.max_evals, "Evaluation cap per run")->capture_default_str();
  s_solve->add_flag("--log-space", sol.log_space, "Search log10 ratios instead of ratios");
  s_solve->add_option("--out", sol.out, "JSONL results file");

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "Score a stored field (.txt) or mask (.pgm) against a target");
  s_eval->add_option("--pred", ev.pred, "Ratio field or mask");
  s_eval->add_option("--target", ev.target, "Target mask or built-in name");
  s_eval->add_flag("--report-tv", ev.report_tv, "Include TV of the field");
  s_eval->add_option("--mode", ev.mode, "Reward mode")->capture_default_str();
  s_eval->add_option("--lambda-tv", ev.lambda_tv, "TV weight")->capture_default_str();

  GrpoArgs gr;
  auto* s_grpo = app.add_subcommand("grpo", "GRPO loop with the mean-field reference policy");
  s_grpo->add_option("--mode", gr.mode, "accuracy, regularity or hybrid")->capture_default_str();
  s_grpo->add_option("--calls", gr.calls, "Environment calls (default 10000, desk 2000)");
  s_grpo->add_option("--group", gr.group, "Group size G")->capture_default_str();
  s_grpo->add_option("--temp", gr.temp, "Weight temperature")->capture_default_str();
  s_grpo->add_option("--target", gr.target, "Target mask or built-in name");
  s_grpo->add_option("--dataset", gr.dataset, "Take the target from this dataset's test split");
  s_grpo->add_option("--index", gr.index, "Test-split index when --dataset is used")->capture_default_str();
  s_grpo->add_option("--lambda-tv", gr.lambda_tv, "TV weight (default 0, regularity mode 0.01)");
  s_grpo->add_option("--noise", gr.noise, "Policy noise in log10 units")->capture_default_str();
  s_grpo->add_option("--lr", gr.lr, "Policy learning rate")->capture_default_str();
  s_grpo->add_option("--out", gr.out, "Output directory for trace.jsonl and policy.txt");

  BenchArgs be;
  auto* s_bench = app.add_subcommand("bench", "Wall-clock sweep over grid sizes");
  s_bench->add_option("--grids", be.grids, "Grid sizes in 6..24")->delimiter(',')->capture_default_str();
  s_bench->add_option("--methods", be.methods, "Solvers")->delimiter(',')->capture_default_str();
  s_bench->add_option("--targets", be.targets, "Targets")->delimiter(',')->capture_default_str();
  s_bench->add_option("--run-id", be.run_id, "Run identifier (default: unix time)");
  s_bench->add_option("--max-evals", be.max_evals, "Evaluation cap per run")->capture_default_str();
  s_bench->add_option("--out", be.out, "CSV file (appended)")->capture_default_str();

  ExportArgs ex;
  auto* s_export = app.add_subcommand("export", "Decode a stored field and write a DXF cut file");
  s_export->add_option("--field", ex.field, "Ratio field text file");
  s_export->add_option("--scale-mm", ex.scale_mm, "Millimeters per model unit")->capture_default_str();
  s_export->add_option("--fit-mm", ex.fit_mm, "Scale so the larger extent is this many mm (overrides --scale-mm)");
  s_export->add_option("--connector-radius", ex.connector_radius,
                       "Connector radius in model units (default 2% of the shortest edge)");
  s_export->add_option("--out", ex.out, "DXF path");

  std::string targets_out = "assets/targets";
  auto* s_targets = app.add_subcommand("targets", "Write the built-in target masks as PGM");
  s_targets->add_option("--out", targets_out, "Directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (g.simd == "scalar") simd::set_backend(simd::Backend::Scalar);
    if (g.simd == "avx2") simd::set_backend(simd::Backend::Avx2);
    DeploymentParam{g.phi};
    if (g.raster < 8) throw ConfigError("--raster must be at least 8");
    if (*s_gen) return cmd_gen(app, *s_gen, g, gen);
    if (*s_solve) return cmd_solve(app, *s_solve, g, sol);
    if (*s_eval) return cmd_eval(app, *s_eval, g, ev);
    if (*s_grpo) return cmd_grpo(app, *s_grpo, g, gr);
    if (*s_bench) return cmd_bench(app, *s_bench, g, be);
    if (*s_export) return cmd_export(app, *s_export, g, ex);
    if (*s_targets) return cmd_targets(g, targets_out);
  } catch (const GenerationStall& e) {
    std::fprintf(stderr, "generation stalled: %s\n", e.what());
    return kStall;
  } catch (const VerificationFailure& e) {
    std::fprintf(stderr, "verification failed: %s\n", e.what());
    return kVerify;
  } catch (const Infeasible& e) {
    std::fprintf(stderr, "refusing to export: %s\n", e.what());
    return kInfeasible;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kConfig;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "invalid value: %s\n", e.what());
    return kConfig;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kConfig;
  } catch (const MetricError& e) {
    std::fprintf(stderr, "cannot score: %s\n", e.what());
    return kConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}
