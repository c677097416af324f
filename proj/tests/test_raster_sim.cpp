#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "kiri/errors.hpp"
#include "kiri/forward_sim.hpp"
#include "kiri/geometry.hpp"
#include "kiri/raster.hpp"
#include "fixtures.hpp"

using namespace kiri;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "kiri_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

Layout decode(const RatioField& x, double phi = kPi / 3) {
  return march_decode(x, DeploymentParam(phi), BoundaryAnchors::rectangular(x.shape()));
}

}  // namespace

TEST_SUITE("raster") {
  TEST_CASE("axis aligned square covers exactly the enclosed centers") {
    Mask m(10, 10);
    rasterize_pixel_quad({Vec2{2, 2}, Vec2{6, 2}, Vec2{6, 5}, Vec2{2, 5}}, m);
    CHECK(m.count() == 12);
    CHECK(m.at(2, 2) == 1);
    CHECK(m.at(4, 5) == 1);
    CHECK(m.at(5, 2) == 0);
    CHECK(m.at(2, 6) == 0);
  }

  TEST_CASE("shared edges are filled exactly once") {
    // Centers on x = 3.5 lie on the shared edge; exactly one side claims them.
    Mask left(8, 4), right(8, 4), both(8, 4);
    const QuadVertices a{Vec2{0.5, 0}, Vec2{3.5, 0}, Vec2{3.5, 4}, Vec2{0.5, 4}};
    const QuadVertices b{Vec2{3.5, 0}, Vec2{7.5, 0}, Vec2{7.5, 4}, Vec2{3.5, 4}};
    rasterize_pixel_quad(a, left);
    rasterize_pixel_quad(b, right);
    for (std::size_t k = 0; k < left.bits.size(); ++k) CHECK((left.bits[k] & right.bits[k]) == 0);
    rasterize_pixel_quad(a, both);
    rasterize_pixel_quad(b, both);
    CHECK(both.count() == left.count() + right.count());
    CHECK(both.count() == 7 * 4);
  }

  TEST_CASE("orientation does not matter") {
    Mask ccw(16, 16), cw(16, 16);
    const QuadVertices q{Vec2{1.2, 3.1}, Vec2{12.7, 1.4}, Vec2{14.2, 11.9}, Vec2{3.3, 13.6}};
    rasterize_pixel_quad(q, ccw);
    rasterize_pixel_quad({q[3], q[2], q[1], q[0]}, cw);
    CHECK(ccw.bits == cw.bits);
    CHECK(ccw.count() > 100);
  }

  TEST_CASE("degenerate and off-screen quads are harmless") {
    Mask m(8, 8);
    rasterize_pixel_quad({Vec2{1, 1}, Vec2{5, 1}, Vec2{9, 1}, Vec2{5, 1}}, m);
    rasterize_pixel_quad({Vec2{-50, -50}, Vec2{-40, -50}, Vec2{-40, -40}, Vec2{-50, -40}}, m);
    rasterize_pixel_quad({Vec2{0, 0}, Vec2{1e300, 0}, Vec2{1e300, 1e300}, Vec2{0, 1e300}}, m);
    CHECK(m.count() == 64);
    Mask n(8, 8);
    rasterize_pixel_quad({Vec2{0, 0}, Vec2{std::nan(""), 0}, Vec2{4, 4}, Vec2{0, 4}}, n);
    CHECK(n.count() == 0);
  }

  TEST_CASE("polygon fill agrees with quad fill for convex quads") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 32.0);
    for (int t = 0; t < 50; ++t) {
      const Vec2 c{16, 16};
      const double r = 4 + u(rng) / 3;
      const double a0 = u(rng);
      QuadVertices q;
      for (int k = 0; k < 4; ++k) {
        const double th = a0 + k * kPi / 2 + 0.02 * u(rng);
        q[k] = {c.x + r * std::cos(th), c.y + r * std::sin(th)};
      }
      Mask a(32, 32), b(32, 32);
      rasterize_pixel_quad(q, a);
      rasterize_polygon(q, b);
      // Identical except possibly on centers that sit exactly on an edge.
      std::size_t diff = 0;
      for (std::size_t k = 0; k < a.bits.size(); ++k) diff += a.bits[k] != b.bits[k];
      CHECK(diff <= 2);
    }
  }

  TEST_CASE("iou") {
    Mask a(4, 4), b(4, 4);
    CHECK(mask_iou(a, b) == 1.0);
    a.set(0, 0);
    a.set(0, 1);
    b.set(0, 1);
    CHECK(mask_iou(a, b) == 0.5);
    CHECK_THROWS_AS(mask_iou(a, Mask(3, 4)), MetricError);
  }

  TEST_CASE("pgm round trip") {
    Mask m(5, 3);
    m.set(0, 0);
    m.set(2, 4);
    m.set(1, 2);
    const auto path = scratch("roundtrip.pgm");
    write_pgm(m, path);
    const Mask r = read_pgm(path);
    CHECK(r.width == 5);
    CHECK(r.height == 3);
    CHECK(r.bits == m.bits);
  }

  TEST_CASE("pgm parsing errors") {
    const auto path = scratch("bad.pgm");
    {
      std::ofstream f(path, std::ios::binary);
      f << "P2\n2 2\n255\n0 0 0 0\n";
    }
    CHECK_THROWS_AS(read_pgm(path), IoError);
    {
      std::ofstream f(path, std::ios::binary);
      f << "P5\n4 4\n255\n";
      f.write("\0\0", 2);
    }
    CHECK_THROWS_AS(read_pgm(path), IoError);
    CHECK_THROWS_AS(read_pgm(scratch("missing.pgm")), IoError);
  }

  TEST_CASE("pgm with comments and threshold") {
    const auto path = scratch("comment.pgm");
    {
      std::ofstream f(path, std::ios::binary);
      f << "P5\n# made by hand\n2 1\n255\n";
      const char px[2] = {static_cast<char>(200), 10};
      f.write(px, 2);
    }
    const Mask m = read_pgm(path);
    CHECK(m.at(0, 0) == 1);
    CHECK(m.at(0, 1) == 0);
  }
}

TEST_SUITE("forward_sim") {
  TEST_CASE("mask shape and fill") {
    const Layout L = decode(testing::feasible_field(GridShape(4, 4)));
    const Mask m = simulate(L);
    CHECK(m.width == 128);
    CHECK(m.height == 128);
    CHECK(m.count() > 0);
    // The larger extent spans 90% of the side.
    int cmin = 128, cmax = -1, rmin = 128, rmax = -1;
    for (int r = 0; r < 128; ++r) {
      for (int c = 0; c < 128; ++c) {
        if (!m.at(r, c)) continue;
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
      }
    }
    const int span = std::max(cmax - cmin, rmax - rmin) + 1;
    CHECK(span >= 113);
    CHECK(span <= 117);
    CHECK(cmin >= 0);
    CHECK(rmin >= 0);
  }

  TEST_CASE("invariant under rigid motion and uniform scale of the anchors") {
    const RatioField x = testing::feasible_field(GridShape(3, 3));
    const auto base = BoundaryAnchors::rectangular(x.shape());
    BoundaryAnchors moved = base;
    for (Vec2& p : moved.top) p = p + Vec2{1000.0, -250.0};
    for (Vec2& p : moved.left) p = p + Vec2{1000.0, -250.0};
    const Mask a = simulate(march_decode(x, DeploymentParam(1.0), base));
    const Mask b = simulate(march_decode(x, DeploymentParam(1.0), moved));
    std::size_t diff = 0;
    for (std::size_t k = 0; k < a.bits.size(); ++k) diff += a.bits[k] != b.bits[k];
    CHECK(diff <= a.count() / 100 + 4);

    const auto scaled = BoundaryAnchors::rectangular(x.shape(), 8.0);
    const Mask c = simulate(march_decode(x, DeploymentParam(1.0), scaled));
    diff = 0;
    for (std::size_t k = 0; k < a.bits.size(); ++k) diff += a.bits[k] != c.bits[k];
    CHECK(diff <= a.count() / 100 + 4);
  }

  TEST_CASE("deterministic and raster size configurable") {
    const Layout L = decode(testing::feasible_field(GridShape(5, 5)));
    CHECK(simulate(L).bits == simulate(L).bits);
    const Mask big = simulate(L, RasterConfig{256, 64, 0.9});
    CHECK(big.width == 256);
    CHECK(big.height == 64);
    CHECK_THROWS_AS(simulate(L, RasterConfig{0, 10, 0.9}), ConfigError);
  }

  TEST_CASE("failed decode is a contract violation") {
    Layout L = decode(RatioField::constant(GridShape(2, 2), 1.0));
    L.feasibility.decode_failed = true;
    CHECK_THROWS_AS(simulate(L), ContractError);
  }
}

TEST_SUITE("forward_sim") {
  TEST_CASE("unit square is centered and spans 90 percent") {
    const Layout L = march_decode(RatioField::constant(GridShape(1, 1), 1.0), DeploymentParam(kPi / 2),
                                  BoundaryAnchors::rectangular(GridShape(1, 1)));
    const Mask m = simulate(L);
    // 115.2 px square centered at 64 spans 6.4..121.6: centers of columns 6..121.
    CHECK(m.count() == 116 * 116);
    CHECK(m.at(6, 6) == 1);
    CHECK(m.at(121, 121) == 1);
    CHECK(m.at(5, 64) == 0);
    CHECK(m.at(64, 122) == 0);
  }

  TEST_CASE("quad covering the frame sets every pixel") {
    Mask m(128, 128);
    rasterize_pixel_quad({Vec2{-1, -1}, Vec2{129, -1}, Vec2{129, 129}, Vec2{-1, 129}}, m);
    CHECK(m.count() == 128u * 128u);
  }

  TEST_CASE("pixel count tracks analytic area") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
      const double ppu = 20.0 + 20.0 * u(rng);
      const Frame f{ppu, ppu, 64.0 + u(rng), 64.0 + u(rng)};
      const double th = kPi * u(rng), sh = 0.5 * u(rng);
      const Vec2 a{std::cos(th), std::sin(th)};
      const Vec2 b = rotate(kPi / 2 - sh, a);
      const QuadVertices q{Vec2{0, 0}, a, a + b, b};
      Mask m(128, 128);
      rasterize_quad(q, f, m);
      const double area = std::abs(cross(a, b)) * ppu * ppu;
      const double perim = 4.0 * ppu;
      CHECK(std::abs(static_cast<double>(m.count()) - area) <= 2.0 * perim);
    }
  }

  TEST_CASE("union monotonicity") {
    Mask m(32, 32);
    rasterize_pixel_quad({Vec2{2, 2}, Vec2{20, 4}, Vec2{18, 22}, Vec2{3, 19}}, m);
    const auto before = m.bits;
    rasterize_pixel_quad({Vec2{10, 10}, Vec2{30, 12}, Vec2{28, 30}, Vec2{12, 29}}, m);
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(m.bits[k] >= before[k]);
  }

  TEST_CASE("all-ones right angle layout closes onto the anchors") {
    // The left neighbor's p2 lands exactly on the next top anchor: zero seed edge.
    const Layout L = march_decode(RatioField::constant(GridShape(2, 2), 1.0), DeploymentParam(kPi / 2),
                                  BoundaryAnchors::rectangular(GridShape(2, 2)));
    CHECK(L.feasibility.decode_failed);
  }

  TEST_CASE("layouts against a supersampled oracle") {
    // Frame-identical 8x render filled by the scanline filler, majority-voted down to 128.
    auto oracle = [](const Layout& L, const Frame& frame) {
      Mask hi(1024, 1024);
      for (const auto& q : L.quads) {
        std::vector<Vec2> px;
        for (const Vec2& v : q.p) {
          const Vec2 p = frame.to_pixel(v);
          px.push_back({8.0 * p.x, 8.0 * p.y});
        }
        Mask one(1024, 1024);
        rasterize_polygon(px, one);
        for (std::size_t k = 0; k < one.bits.size(); ++k) hi.bits[k] |= one.bits[k];
      }
      Mask down(128, 128);
      for (int r = 0; r < 128; ++r) {
        for (int c = 0; c < 128; ++c) {
          int n = 0;
          for (int dr = 0; dr < 8; ++dr) {
            for (int dc = 0; dc < 8; ++dc) n += hi.at(8 * r + dr, 8 * c + dc);
          }
          down.set(r, c, n > 32);
        }
      }
      return down;
    };
    auto edge_distance = [](const Layout& L, const Frame& frame, Vec2 p) {
      double best = 1e300;
      for (const auto& q : L.quads) {
        for (int k = 0; k < 4; ++k) {
          const Vec2 a = frame.to_pixel(q.p[k]), b = frame.to_pixel(q.p[(k + 1) % 4]);
          const Vec2 d = b - a;
          const double t = std::clamp(dot(p - a, d) / dot(d, d), 0.0, 1.0);
          best = std::min(best, norm(p - (a + t * d)));
        }
      }
      return best;
    };

    SUBCASE("unit square at a right angle") {
      const Layout L = march_decode(RatioField::constant(GridShape(1, 1), 1.0), DeploymentParam(kPi / 2),
                                    BoundaryAnchors::rectangular(GridShape(1, 1)));
      const Mask m = simulate(L);
      CHECK(mask_iou(m, oracle(L, m.frame)) >= 0.999);
    }
    SUBCASE("2x2 all-ones, oblique angles") {
      for (double phi : {kPi / 3, 1.3}) {
        const Layout L = march_decode(RatioField::constant(GridShape(2, 2), 1.0), DeploymentParam(phi),
                                      BoundaryAnchors::rectangular(GridShape(2, 2)));
        REQUIRE_FALSE(L.feasibility.decode_failed);
        const Mask m = simulate(L);
        const Mask o = oracle(L, m.frame);
        INFO("phi = " << phi);
        CHECK(mask_iou(m, o) >= 0.995);
        // Center sampling and 8x8 majority can only disagree right next to an edge.
        for (int r = 0; r < 128; ++r) {
          for (int c = 0; c < 128; ++c) {
            if (m.at(r, c) != o.at(r, c)) CHECK(edge_distance(L, m.frame, {c + 0.5, r + 0.5}) <= 0.15);
          }
        }
      }
    }
  }
}
