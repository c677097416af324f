#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "kiri/dxf.hpp"
#include "kiri/errors.hpp"
#include "dxf_checks.hpp"
#include "fixtures.hpp"

using namespace kiri;

namespace {

Layout decode(const RatioField& x, double phi = kPi / 3) {
  return march_decode(x, DeploymentParam(phi), BoundaryAnchors::rectangular(x.shape()));
}

double extent(const Layout& L) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& q : L.quads) {
    for (const Vec2& v : q.p) {
      lo = std::min({lo, v.x, v.y});
      hi = std::max({hi, v.x, v.y});
    }
  }
  return hi - lo;
}

// Index of the quad whose outline contains every point of `path`, or -1.
int owner(const Layout& L, const Polyline& path, double rel) {
  for (std::size_t k = 0; k < L.quads.size(); ++k) {
    const auto& q = L.quads[k];
    bool all = true;
    for (const Vec2& p : path.points) {
      double d = INFINITY;
      for (int e = 0; e < 4; ++e) d = std::min(d, testing::segment_distance(p, q.p[e], q.p[(e + 1) % 4]));
      if (d > testing::slack_at(p, rel)) {
        all = false;
        break;
      }
    }
    if (all) return static_cast<int>(k);
  }
  return -1;
}

}  // namespace

TEST_SUITE("dxf") {
  TEST_CASE("zero radius keeps the raw outlines") {
    const Layout L = decode(testing::feasible_field(GridShape(3, 3)));
    ConnectorConfig cfg;
    cfg.radius = 0.0;
    const CutPlan plan = plan_cuts(L, cfg);
    REQUIRE(plan.paths.size() == 9);
    CHECK(plan.connectors.empty());
    CHECK(plan.trimmed.empty());
    for (std::size_t k = 0; k < 9; ++k) {
      CHECK(plan.paths[k].closed);
      REQUIRE(plan.paths[k].points.size() == 4);
      for (int v = 0; v < 4; ++v) CHECK(plan.paths[k].points[v] == L.quads[k].p[v]);
    }
  }

  TEST_CASE("single void has no connectors") {
    const Layout L = decode(RatioField::constant(GridShape(1, 1), 1.0), kPi / 2);
    const CutPlan plan = plan_cuts(L);
    CHECK(plan.connectors.empty());
    CHECK(plan.paths.size() == 1);
    CHECK(plan.paths[0].closed);
  }

  TEST_CASE("2x2 connectors sit on the shared vertices and trimming is exact") {
    const Layout L = decode(RatioField::constant(GridShape(2, 2), 1.0));
    REQUIRE_FALSE(L.feasibility.decode_failed);
    std::map<std::pair<double, double>, int> uses;
    for (const auto& q : L.quads) {
      for (const Vec2& v : q.p) ++uses[{v.x, v.y}];
    }
    int shared = 0;
    for (const auto& [k, n] : uses) shared += n >= 2;

    const double r = 0.05;
    ConnectorConfig cfg;
    cfg.radius = r;
    const CutPlan plan = plan_cuts(L, cfg);
    CHECK(plan.connectors.size() == static_cast<std::size_t>(shared));
    CHECK(shared == 4);
    for (const auto& c : plan.connectors) {
      CHECK(uses[{c.center.x, c.center.y}] >= 2);
      CHECK(c.radius == r);
    }
    for (std::size_t k = 1; k < plan.connectors.size(); ++k) {
      const Vec2 a = plan.connectors[k - 1].center, b = plan.connectors[k].center;
      CHECK((a.x < b.x || (a.x == b.x && a.y < b.y)));
    }
    const auto audit = testing::audit_trim(plan, r, 1e-9);
    CHECK(audit.kept_inside == 0);
    CHECK(audit.removed_outside == 0);
    CHECK(plan.trimmed.size() >= 2 * plan.connectors.size());
  }

  TEST_CASE("oversized connectors are rejected") {
    const Layout L = decode(testing::feasible_field(GridShape(3, 3)));
    ConnectorConfig cfg;
    cfg.radius = 1e30;
    CHECK_THROWS_AS(plan_cuts(L, cfg), ConfigError);
    cfg.radius = -1.0;
    CHECK_THROWS_AS(plan_cuts(L, cfg), ConfigError);
  }

  TEST_CASE("10x10 plan structure") {
    const auto samples = testing::feasible_samples(GridShape(10, 10), 3, 2);
    for (const auto& s : samples) {
      const Layout L = decode(s.x);
      const CutPlan plan = plan_cuts(L);
      std::map<int, int> pieces;
      const double tol = 1e-9;
      for (const auto& path : plan.paths) {
        const int k = owner(L, path, tol);
        CHECK(k >= 0);
        ++pieces[k];
      }
      CHECK(pieces.size() <= 100);
      // Each disk touching an outline opens at most one gap in it.
      for (const auto& [k, n] : pieces) {
        const auto& q = L.quads[k].p;
        int disks = 0;
        for (const auto& c : plan.connectors) {
          double d = INFINITY;
          for (int e = 0; e < 4; ++e) d = std::min(d, testing::segment_distance(c.center, q[e], q[(e + 1) % 4]));
          if (d < c.radius) ++disks;
        }
        CHECK(n <= std::max(1, disks));
      }
      const std::string text = format_dxf(plan, 300.0 / extent(L));
      std::size_t circles = 0, polylines = 0;
      for (std::size_t at = 0; (at = text.find("\nCIRCLE\n", at)) != std::string::npos; ++at) ++circles;
      for (std::size_t at = 0; (at = text.find("\nPOLYLINE\n", at)) != std::string::npos; ++at) ++polylines;
      CHECK(circles == plan.connectors.size());
      CHECK(polylines == plan.paths.size());
      const auto r = plan.connectors.empty() ? 0.0 : plan.connectors.front().radius;
      const auto audit = testing::audit_trim(plan, r, tol);
      CHECK(audit.kept_inside == 0);
      CHECK(audit.removed_outside == 0);
    }
  }

  TEST_CASE("header, layers and units") {
    const CutPlan plan = plan_cuts(decode(RatioField::constant(GridShape(2, 2), 1.0)));
    const std::string text = format_dxf(plan, 10.0);
    CHECK(text.find("$INSUNITS\n70\n4\n") != std::string::npos);
    CHECK(text.find("$ACADVER") != std::string::npos);
    CHECK(text.find("\nCUT\n") != std::string::npos);
    CHECK(text.find("\nCONNECTOR\n") != std::string::npos);
    CHECK(text.size() > 100);
    CHECK(text.substr(text.size() - 4) == "EOF\n");
    CHECK_THROWS_AS(format_dxf(plan, 0.0), ConfigError);
  }

  TEST_CASE("empty plan round trip") {
    const CutPlan empty;
    const CutPlan back = parse_dxf(format_dxf(empty, 1.0));
    CHECK(back.paths.empty());
    CHECK(back.connectors.empty());
  }

  TEST_CASE("write and read back") {
    const Layout L = decode(testing::feasible_field(GridShape(5, 5)));
    const CutPlan plan = plan_cuts(L);
    const double scale = 250.0 / extent(L);
    const auto path = std::filesystem::temp_directory_path() / "kiri_tests" / "plan.dxf";
    std::filesystem::create_directories(path.parent_path());
    write_dxf(plan, scale, path);
    const CutPlan back = read_dxf(path);
    REQUIRE(back.paths.size() == plan.paths.size());
    REQUIRE(back.connectors.size() == plan.connectors.size());
    for (std::size_t k = 0; k < plan.paths.size(); ++k) {
      CHECK(back.paths[k].closed == plan.paths[k].closed);
      REQUIRE(back.paths[k].points.size() == plan.paths[k].points.size());
      for (std::size_t v = 0; v < plan.paths[k].points.size(); ++v) {
        CHECK(std::abs(back.paths[k].points[v].x - scale * plan.paths[k].points[v].x) <= 1e-6);
        CHECK(std::abs(back.paths[k].points[v].y - scale * plan.paths[k].points[v].y) <= 1e-6);
      }
    }
    for (std::size_t k = 0; k < plan.connectors.size(); ++k) {
      CHECK(std::abs(back.connectors[k].radius - scale * plan.connectors[k].radius) <= 1e-6);
    }
    CHECK(format_dxf(plan, scale) == format_dxf(plan_cuts(L), scale));
    CHECK_THROWS_AS(write_dxf(plan, scale, "/nonexistent/dir/x.dxf"), IoError);
  }

  TEST_CASE("reader errors") {
    const CutPlan plan = plan_cuts(decode(RatioField::constant(GridShape(2, 2), 1.0)));
    const std::string text = format_dxf(plan, 10.0);
    CHECK_THROWS_AS(parse_dxf(text.substr(0, text.size() / 2)), ParseError);
    CHECK_THROWS_AS(parse_dxf(text.substr(0, text.size() - 4)), ParseError);

    const std::string foreign = "  0\nSECTION\n  2\nENTITIES\n  0\nLWPOLYLINE\n  8\n0\n  0\nENDSEC\n  0\nEOF\n";
    try {
      parse_dxf(foreign);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("LWPOLYLINE") != std::string::npos);
      CHECK(e.line() > 0);
    }
    CHECK_THROWS_AS(parse_dxf("  0\nSECTION\n  x\n"), ParseError);
    CHECK_THROWS_AS(read_dxf("/nonexistent.dxf"), IoError);
  }
}
