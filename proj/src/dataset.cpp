#include "kiri/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <thread>

#include "json.hpp"
#include "kiri/errors.hpp"
#include "kiri/matrix_io.hpp"
#include "kiri/sobol.hpp"

namespace kiri {

namespace fs = std::filesystem;
using nlohmann::json;

int split_stream(const std::string& split) {
  if (split == "train") return 0;
  if (split == "val") return 1;
  if (split == "test") return 2;
  throw ConfigError("unknown split '" + split + "' (expected train, val or test)");
}

bool single_component(const Mask& m) {
  const std::size_t total = m.count();
  if (total == 0) return false;
  std::size_t start = 0;
  while (!m.bits[start]) ++start;
  std::vector<std::uint8_t> seen(m.bits.size(), 0);
  std::vector<std::size_t> stack{start};
  seen[start] = 1;
  std::size_t reached = 0;
  while (!stack.empty()) {
    const std::size_t k = stack.back();
    stack.pop_back();
    ++reached;
    const int r = static_cast<int>(k / m.width), c = static_cast<int>(k % m.width);
    const int nr[4] = {r - 1, r + 1, r, r};
    const int nc[4] = {c, c, c - 1, c + 1};
    for (int t = 0; t < 4; ++t) {
      if (nr[t] < 0 || nc[t] < 0 || nr[t] >= m.height || nc[t] >= m.width) continue;
      const std::size_t q = static_cast<std::size_t>(nr[t]) * m.width + nc[t];
      if (m.bits[q] && !seen[q]) {
        seen[q] = 1;
        stack.push_back(q);
      }
    }
  }
  return reached == total;
}

bool passes_topology(const Mask& m, const GenConfig& cfg) {
  const double frac = static_cast<double>(m.count()) / static_cast<double>(m.bits.size());
  return frac >= cfg.min_foreground && frac <= cfg.max_foreground && single_component(m);
}

bool render_feasible(const RatioField& x, const GenConfig& cfg, Mask& out) {
  const Layout layout = march_decode(x, DeploymentParam(cfg.phi), BoundaryAnchors::rectangular(x.shape()),
                                     cfg.feasibility);
  if (!check_feasible(layout, cfg.feasibility.tau_ov)) return false;
  Mask m = simulate(layout, cfg.raster);
  if (!passes_topology(m, cfg)) return false;
  out = std::move(m);
  return true;
}

namespace {

std::string sample_id(const std::string& split, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06zu", split.c_str(), k);
  return buf;
}

int worker_count(const GenConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

SplitResult generate_split(const std::string& split, int count, const GenConfig& cfg) {
  if (count < 0) throw ConfigError("sample count must be nonnegative");
  SplitResult res;
  res.split = split;
  if (count == 0) return res;

  const int dim = static_cast<int>(cfg.shape.size());
  const std::uint64_t origin = sobol_stream_origin(cfg.seed, split_stream(split));
  SobolEngine engine(dim, origin);
  const int workers = worker_count(cfg);
  const std::size_t batch = static_cast<std::size_t>(64 * workers);

  struct Candidate {
    std::uint64_t index = 0;
    std::vector<double> z;
    bool ok = false;
    RatioField x;
    Mask y;
  };
  std::vector<Candidate> cands(batch);
  std::uint64_t window_start = 0, window_accepts = 0;

  while (res.samples.size() < static_cast<std::size_t>(count)) {
    for (auto& c : cands) {
      c.index = engine.index();
      c.z.resize(dim);
      engine.next(c.z);
      c.ok = false;
    }
    // Contiguous index ranges per worker; acceptance below is in index order.
    auto work = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t k = lo; k < hi; ++k) {
        Candidate& c = cands[k];
        Field z(cfg.shape);
        for (int d = 0; d < dim; ++d) z.storage()[d] = 2.0 * c.z[d] - 1.0;
        c.x = z_to_ratio(z);
        c.ok = render_feasible(c.x, cfg, c.y);
      }
    };
    {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (batch + workers - 1) / workers;
      for (std::size_t lo = 0; lo < batch; lo += chunk) pool.emplace_back(work, lo, std::min(batch, lo + chunk));
    }
    for (auto& c : cands) {
      if (res.samples.size() == static_cast<std::size_t>(count)) break;
      ++res.candidates;
      if (c.ok) {
        ++window_accepts;
        res.samples.push_back({sample_id(split, res.samples.size()), std::move(c.x), std::move(c.y), c.index});
      }
      if (res.candidates - window_start == static_cast<std::uint64_t>(cfg.stall_window)) {
        const double rate = static_cast<double>(window_accepts) / cfg.stall_window;
        if (rate < cfg.min_acceptance) {
          throw GenerationStall("acceptance rate " + std::to_string(rate) + " over the last " +
                                std::to_string(cfg.stall_window) + " candidates");
        }
        window_start = res.candidates;
        window_accepts = 0;
      }
    }
  }
  res.acceptance_rate = static_cast<double>(res.samples.size()) / static_cast<double>(res.candidates);
  return res;
}

void write_split(const SplitResult& result, const fs::path& root) {
  const fs::path dir = root / result.split;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& s : result.samples) {
    write_matrix(s.x.field(), dir / (s.id + ".x.txt"));
    write_pgm(s.y, dir / (s.id + ".y.pgm"));
  }
}

namespace {

json config_to_json(const GenConfig& cfg) {
  return json{{"grid", {cfg.shape.m, cfg.shape.n}},
              {"phi", cfg.phi},
              {"raster", {cfg.raster.width, cfg.raster.height}},
              {"fill_fraction", cfg.raster.fill_fraction},
              {"tau_ov", cfg.feasibility.tau_ov},
              {"union_resolution", cfg.feasibility.union_resolution},
              {"union_padding", cfg.feasibility.union_padding},
              {"seed", cfg.seed},
              {"min_foreground", cfg.min_foreground},
              {"max_foreground", cfg.max_foreground}};
}

GenConfig config_from_json(const json& j) {
  GenConfig cfg;
  cfg.shape = GridShape(j.at("grid").at(0).get<int>(), j.at("grid").at(1).get<int>());
  cfg.phi = j.at("phi").get<double>();
  cfg.raster.width = j.at("raster").at(0).get<int>();
  cfg.raster.height = j.at("raster").at(1).get<int>();
  cfg.raster.fill_fraction = j.at("fill_fraction").get<double>();
  cfg.feasibility.tau_ov = j.at("tau_ov").get<double>();
  cfg.feasibility.union_resolution = j.at("union_resolution").get<int>();
  cfg.feasibility.union_padding = j.at("union_padding").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.min_foreground = j.at("min_foreground").get<double>();
  cfg.max_foreground = j.at("max_foreground").get<double>();
  return cfg;
}

}  // namespace

std::string config_json(const GenConfig& cfg) { return config_to_json(cfg).dump(); }

std::string config_hash(const GenConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : config_json(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(const fs::path& root, const GenConfig& cfg, const std::vector<SplitResult>& splits) {
  json j;
  j["config"] = config_to_json(cfg);
  j["config_hash"] = config_hash(cfg);
  json sj = json::object();
  for (const auto& s : splits) {
    json ids = json::array();
    for (const auto& smp : s.samples) ids.push_back(smp.id);
    sj[s.split] = {{"count", s.samples.size()},
                   {"candidates", s.candidates},
                   {"acceptance_rate", s.acceptance_rate},
                   {"ids", ids}};
  }
  j["splits"] = sj;
  std::error_code ec;
  fs::create_directories(root, ec);
  write_text(root / "manifest.json", j.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& root) {
  const fs::path p = root / "manifest.json";
  if (!fs::exists(p)) throw ConfigError("no dataset manifest at " + p.string());
  json j;
  try {
    j = json::parse(read_text(p));
    Manifest m;
    m.config = config_from_json(j.at("config"));
    m.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& [name, split] : j.at("splits").items()) {
      m.ids[name] = split.at("ids").get<std::vector<std::string>>();
      m.acceptance[name] = split.at("acceptance_rate").get<double>();
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + p.string() + ": " + e.what());
  }
}

DatasetSample load_sample(const fs::path& root, const std::string& split, const std::string& id) {
  DatasetSample s;
  s.id = id;
  s.x = RatioField(read_matrix(root / split / (id + ".x.txt")));
  s.y = read_pgm(root / split / (id + ".y.pgm"));
  return s;
}

bool VerifyReport::passed() const {
  return std::all_of(splits.begin(), splits.end(), [](const SplitCheck& s) { return s.failures.empty(); });
}

VerifyReport check_dataset(const fs::path& root, int sample_count, std::uint64_t seed) {
  const Manifest man = read_manifest(root);
  VerifyReport rep;
  std::mt19937_64 rng(seed);
  for (const auto& [split, all_ids] : man.ids) {
    std::vector<std::string> ids = all_ids;
    std::shuffle(ids.begin(), ids.end(), rng);
    if (sample_count >= 0 && ids.size() > static_cast<std::size_t>(sample_count)) ids.resize(sample_count);
    SplitCheck chk;
    chk.split = split;
    for (const auto& id : ids) {
      ++chk.checked;
      double iou = 0.0;
      try {
        const DatasetSample s = load_sample(root, split, id);
        const Layout layout = march_decode(s.x, DeploymentParam(man.config.phi),
                                           BoundaryAnchors::rectangular(s.x.shape()), man.config.feasibility);
        if (!layout.feasibility.decode_failed) {
          const Mask again = simulate(layout, man.config.raster);
          if (again.same_size(s.y)) iou = mask_iou(again, s.y);
        }
      } catch (const std::exception&) {
        iou = 0.0;
      }
      chk.min_iou = std::min(chk.min_iou, iou);
      if (iou < kVerifyIou) chk.failures.push_back(id);
    }
    rep.splits.push_back(std::move(chk));
  }
  return rep;
}

VerifyReport verify_dataset(const fs::path& root, int sample_count, std::uint64_t seed) {
  VerifyReport rep = check_dataset(root, sample_count, seed);
  if (!rep.passed()) {
    std::string msg = "re-render IoU below 0.999 for:";
    for (const auto& s : rep.splits) {
      for (const auto& id : s.failures) msg += " " + s.split + "/" + id;
    }
    throw VerificationFailure(msg);
  }
  return rep;
}

}  // namespace kiri
