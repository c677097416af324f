#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "kiri/forward_sim.hpp"
#include "kiri/geometry.hpp"
#include "kiri/metrics.hpp"
#include "kiri/simd.hpp"
#include "fixtures.hpp"

using namespace kiri;

namespace {

bool avx2_usable() { return simd::cpu_has_avx2() && simd::avx2_kernels() != nullptr; }

struct BackendGuard {
  simd::Backend saved = simd::active_backend();
  ~BackendGuard() { simd::set_backend(saved); }
};

simd::QuadEdges random_edges(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-5.0, 70.0);
  QuadVertices q;
  for (auto& v : q) v = {u(rng), u(rng)};
  simd::QuadEdges e{};
  for (int k = 0; k < 4; ++k) {
    e.ax[k] = q[k].x;
    e.ay[k] = q[k].y;
    e.dx[k] = q[(k + 1) % 4].x - q[k].x;
    e.dy[k] = q[(k + 1) % 4].y - q[k].y;
    e.tie[k] = (rng() & 1) != 0;
  }
  return e;
}

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("dispatch") {
    BackendGuard g;
    simd::set_backend(simd::Backend::Scalar);
    CHECK(simd::active_backend() == simd::Backend::Scalar);
    CHECK(simd::backend_name(simd::Backend::Scalar) == "scalar");
    if (avx2_usable()) {
      simd::set_backend(simd::Backend::Avx2);
      CHECK(simd::active_backend() == simd::Backend::Avx2);
    } else {
      CHECK_THROWS_AS(simd::set_backend(simd::Backend::Avx2), ConfigError);
    }
  }

  TEST_CASE("fill_quad_span is bit identical") {
    if (!avx2_usable()) return;
    const auto& s = simd::scalar_kernels();
    const auto& v = *simd::avx2_kernels();
    std::mt19937_64 rng(42);
    for (int t = 0; t < 2000; ++t) {
      const auto e = random_edges(rng);
      const int c0 = static_cast<int>(rng() % 20);
      const int c1 = c0 + static_cast<int>(rng() % 45);
      const double py = static_cast<double>(rng() % 64) + 0.5;
      std::uint8_t a[64] = {}, b[64] = {};
      s.fill_quad_span(e, py, c0, c1, a);
      v.fill_quad_span(e, py, c0, c1, b);
      REQUIRE(std::memcmp(a, b, sizeof a) == 0);
    }
  }

  TEST_CASE("fill_quad_span ties on exact edges") {
    if (!avx2_usable()) return;
    // Integer-plus-half coordinates put centers exactly on edges.
    simd::QuadEdges e{};
    const double xs[4] = {2.5, 9.5, 9.5, 2.5}, ys[4] = {1.5, 1.5, 6.5, 6.5};
    for (int k = 0; k < 4; ++k) {
      e.ax[k] = xs[k];
      e.ay[k] = ys[k];
      e.dx[k] = xs[(k + 1) % 4] - xs[k];
      e.dy[k] = ys[(k + 1) % 4] - ys[k];
    }
    for (int mask = 0; mask < 16; ++mask) {
      for (int k = 0; k < 4; ++k) e.tie[k] = (mask >> k) & 1;
      for (double py : {1.5, 3.5, 6.5}) {
        std::uint8_t a[16] = {}, b[16] = {};
        simd::scalar_kernels().fill_quad_span(e, py, 0, 16, a);
        simd::avx2_kernels()->fill_quad_span(e, py, 0, 16, b);
        CHECK(std::memcmp(a, b, sizeof a) == 0);
      }
    }
  }

  TEST_CASE("mask_counts is identical for every length") {
    if (!avx2_usable()) return;
    std::mt19937_64 rng(7);
    std::vector<std::uint8_t> a(1000), b(1000);
    for (auto& x : a) x = rng() & 1;
    for (auto& x : b) x = rng() & 1;
    for (std::size_t n : {0, 1, 7, 31, 32, 33, 63, 64, 65, 500, 1000}) {
      const auto s = simd::scalar_kernels().mask_counts(a.data(), b.data(), n);
      const auto v = simd::avx2_kernels()->mask_counts(a.data(), b.data(), n);
      CHECK(s.intersection == v.intersection);
      CHECK(s.union_ == v.union_);
      CHECK(s.a == v.a);
      CHECK(s.b == v.b);
    }
  }

  TEST_CASE("transform_points is bit identical") {
    if (!avx2_usable()) return;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    for (std::size_t n : {0, 1, 3, 4, 5, 17, 256}) {
      std::vector<double> xs(n), ys(n), ax(n), ay(n), bx(n), by(n);
      for (std::size_t k = 0; k < n; ++k) {
        xs[k] = u(rng);
        ys[k] = u(rng);
      }
      const simd::SimilarityCoeffs t{u(rng) / 50, u(rng) / 50, u(rng), u(rng)};
      simd::scalar_kernels().transform_points(t, xs.data(), ys.data(), n, ax.data(), ay.data());
      simd::avx2_kernels()->transform_points(t, xs.data(), ys.data(), n, bx.data(), by.data());
      CHECK(std::memcmp(ax.data(), bx.data(), n * sizeof(double)) == 0);
      CHECK(std::memcmp(ay.data(), by.data(), n * sizeof(double)) == 0);
    }
  }

  TEST_CASE("end to end evaluation matches across backends") {
    if (!avx2_usable()) return;
    BackendGuard g;
    const GridShape shape(8, 8);
    const auto samples = testing::feasible_samples(shape, 11, 13);
    const Evaluator ev = Evaluator::for_target(samples[0].y, shape, kPi / 3);
    for (std::size_t t = 1; t < samples.size(); ++t) {
      const RatioField& x = samples[t].x;
      simd::set_backend(simd::Backend::Scalar);
      const EvalResult a = ev.evaluate(x);
      const Mask ma = simulate(march_decode(x, ev.phi, ev.anchors));
      simd::set_backend(simd::Backend::Avx2);
      const EvalResult b = ev.evaluate(x);
      const Mask mb = simulate(march_decode(x, ev.phi, ev.anchors));
      CHECK(a.simulated);
      CHECK(a.siou == b.siou);
      CHECK(a.reward == b.reward);
      CHECK(a.feasibility.overlap_ratio == b.feasibility.overlap_ratio);
      CHECK(ma.bits == mb.bits);
    }
  }
}
