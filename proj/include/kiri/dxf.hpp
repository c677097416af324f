#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kiri/geometry.hpp"

namespace kiri {

struct Polyline {
  std::vector<Vec2> points;
  bool closed = false;
};

struct Connector {
  Vec2 center;
  double radius = 0.0;
};

struct TrimmedSegment {
  std::size_t path = 0;  // index of the void outline it was cut from
  Vec2 a;
  Vec2 b;
};

struct CutPlan {
  std::vector<Polyline> paths;
  std::vector<Connector> connectors;  // sorted by center (x, then y)
  std::vector<TrimmedSegment> trimmed;
};

struct ConnectorConfig {
  std::optional<double> radius;  // model units; default is default_fraction * shortest void edge
  double default_fraction = 0.02;
};

// Void outlines as cut paths, connector disks at vertices shared by two or more
// voids, and every outline piece inside a connector disk removed.
CutPlan plan_cuts(const Layout& layout, const ConnectorConfig& cfg = {});

// Minimal ASCII DXF R12: POLYLINE/VERTEX/SEQEND on layer CUT, CIRCLE on layer CONNECTOR,
// coordinates multiplied by scale_mm and printed with 6 decimals.
std::string format_dxf(const CutPlan& plan, double scale_mm);
void write_dxf(const CutPlan& plan, double scale_mm, const std::filesystem::path& path);

// Reads back files in the dialect above (coordinates in millimeters).
CutPlan parse_dxf(const std::string& text);
CutPlan read_dxf(const std::filesystem::path& path);

}  // namespace kiri
