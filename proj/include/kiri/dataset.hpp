#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kiri/forward_sim.hpp"
#include "kiri/geometry.hpp"
#include "kiri/raster.hpp"

namespace kiri {

struct GenConfig {
  GridShape shape;
  double phi = kPi / 3.0;
  RasterConfig raster;
  FeasibilityConfig feasibility;
  std::uint64_t seed = 0;
  // Topology filter: one 4-connected foreground component covering this fraction of the mask.
  double min_foreground = 0.02;
  double max_foreground = 0.95;
  int stall_window = 10000;
  double min_acceptance = 0.01;
  int threads = 0;  // 0: hardware concurrency
};

// train, val and test draw from disjoint Sobol streams 0, 1 and 2.
int split_stream(const std::string& split);

struct DatasetSample {
  std::string id;
  RatioField x;
  Mask y;
  std::uint64_t sobol_index = 0;
};

struct SplitResult {
  std::string split;
  std::vector<DatasetSample> samples;
  std::uint64_t candidates = 0;
  double acceptance_rate = 0.0;
};

bool single_component(const Mask& mask);
bool passes_topology(const Mask& mask, const GenConfig& cfg);

// Decodes with the default rectangular anchors and renders the silhouette.
// Returns false (leaving `out` untouched) when any feasibility filter rejects x.
bool render_feasible(const RatioField& x, const GenConfig& cfg, Mask& out);

// Draws Sobol candidates until `count` survive every filter.
// Throws GenerationStall when acceptance drops below min_acceptance over a window.
SplitResult generate_split(const std::string& split, int count, const GenConfig& cfg);

// <root>/<split>/<id>.x.txt and <id>.y.pgm.
void write_split(const SplitResult& result, const std::filesystem::path& root);

struct Manifest {
  GenConfig config;
  std::string config_hash;
  std::map<std::string, std::vector<std::string>> ids;
  std::map<std::string, double> acceptance;
};

std::string config_json(const GenConfig& cfg);
std::string config_hash(const GenConfig& cfg);
void write_manifest(const std::filesystem::path& root, const GenConfig& cfg, const std::vector<SplitResult>& splits);
Manifest read_manifest(const std::filesystem::path& root);

DatasetSample load_sample(const std::filesystem::path& root, const std::string& split, const std::string& id);

struct SplitCheck {
  std::string split;
  int checked = 0;
  double min_iou = 1.0;
  std::vector<std::string> failures;
};

struct VerifyReport {
  std::vector<SplitCheck> splits;
  bool passed() const;
};

inline constexpr double kVerifyIou = 0.999;

// Re-renders up to `sample_count` randomly chosen samples per split and compares
// raw IoU with the stored masks. Unreadable or undecodable samples count as failures.
VerifyReport check_dataset(const std::filesystem::path& root, int sample_count, std::uint64_t seed = 0);

// check_dataset, throwing VerificationFailure that lists the offending ids.
VerifyReport verify_dataset(const std::filesystem::path& root, int sample_count, std::uint64_t seed = 0);

}  // namespace kiri
