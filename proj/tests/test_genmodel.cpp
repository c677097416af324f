#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "kiri/errors.hpp"
#include "kiri/genmodel.hpp"
#include "fixtures.hpp"

using namespace kiri;

namespace {

Field filled(GridShape s, double v) { return Field(s, v); }

double brute_force_cost(std::span<const Field> base, std::span<const Field> data) {
  std::vector<int> perm(base.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    best = std::min(best, coupling_cost(base, data, perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_SUITE("genmodel") {
  TEST_CASE("rectified path and flow-matching loss") {
    const GridShape s(10, 10);
    const Field x0 = filled(s, 0.0), x1 = filled(s, 1.0);
    const FlowPath p = rectified_path(x0, x1, 0.25);
    CHECK(p.xt(3, 4) == 0.25);
    CHECK(p.target_velocity(9, 9) == 1.0);

    const Condition c;
    VelocityField exact = [&](const Field&, double, const Condition&) { return p.target_velocity; };
    for (double t : {0.0, 0.3, 1.0}) CHECK(cfm_sample_loss(exact, x0, x1, t, c) == 0.0);

    VelocityField zero = [&](const Field& x, double, const Condition&) { return Field(x.shape(), 0.0); };
    CHECK(cfm_sample_loss(zero, x0, x1, 0.5, c) == 100.0);

    VelocityField off = [&](const Field& x, double, const Condition&) {
      Field v(x.shape(), 1.0);
      v(0, 0) += 0.3;
      v(5, 5) -= 0.4;
      return v;
    };
    CHECK(cfm_sample_loss(off, x0, x1, 0.5, c) == doctest::Approx(0.25).epsilon(1e-12));

    VelocityField bad = [&](const Field& x, double, const Condition&) { return Field(x.shape(), std::nan("")); };
    CHECK_THROWS_AS(cfm_sample_loss(bad, x0, x1, 0.5, c), NumericError);
    CHECK_THROWS_AS(rectified_path(x0, x1, 1.5), DomainError);
  }

  TEST_CASE("coupling examples") {
    const GridShape s(1, 1);
    const std::vector<Field> one{filled(s, 3.0)};
    CHECK(ot_coupling(one, one) == std::vector<int>{0});

    const std::vector<Field> base{filled(s, 0.0), filled(s, 10.0)};
    const std::vector<Field> data{filled(s, 9.0), filled(s, 1.0)};
    CHECK(ot_coupling(base, data) == std::vector<int>{1, 0});
    CHECK(coupling_cost(base, data, std::vector<int>{1, 0}) == 2.0);

    CHECK_THROWS_AS(ot_coupling(base, one), ArgumentError);
    std::vector<Field> big(8, filled(s, 0.0));
    CHECK_THROWS_AS(ot_coupling(big, big, 4), ArgumentError);
  }

  TEST_CASE("coupling matches brute force on random batches") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    const GridShape s(3, 3);
    for (int trial = 0; trial < 60; ++trial) {
      const std::size_t b = 1 + trial % 6;
      std::vector<Field> base, data;
      for (std::size_t k = 0; k < b; ++k) {
        Field a(s), c(s);
        for (double& v : a.values()) v = g(rng);
        for (double& v : c.values()) v = g(rng);
        base.push_back(a);
        data.push_back(c);
      }
      const auto perm = ot_coupling(base, data);
      std::vector<int> sorted = perm;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t k = 0; k < b; ++k) CHECK(sorted[k] == static_cast<int>(k));
      CHECK(coupling_cost(base, data, perm) == brute_force_cost(base, data));
    }
  }

  TEST_CASE("assignment on integer costs with ties") {
    const std::vector<double> cost{4, 1, 3, 2, 0, 5, 3, 2, 2};
    const auto a = solve_assignment(cost, 3);
    double total = 0;
    for (int r = 0; r < 3; ++r) total += cost[r * 3 + a[r]];
    CHECK(total == 5.0);
  }

  TEST_CASE("euler integration") {
    const GridShape s(2, 3);
    const Condition c;
    const Field x0 = filled(s, 2.0);
    VelocityField constant = [&](const Field& x, double, const Condition&) { return Field(x.shape(), 0.75); };
    for (int steps : {1, 3, 8, 16}) CHECK(euler_integrate(constant, x0, c, steps)(1, 2) == 2.75);

    VelocityField ident = [](const Field& x, double, const Condition&) { return x; };
    const Field e = euler_integrate(ident, filled(s, 1.0), c, 8);
    CHECK(e(0, 0) == doctest::Approx(2.5657845139503479004).epsilon(1e-14));
    CHECK(std::abs(e(0, 0) - std::exp(1.0)) / std::exp(1.0) < 0.06);

    VelocityField timed = [](const Field& x, double t, const Condition&) { return Field(x.shape(), t + 1.0); };
    CHECK(euler_integrate(timed, filled(s, 0.0), c, 1)(0, 0) == 1.0);

    VelocityField blowup = [](const Field& x, double t, const Condition&) {
      return Field(x.shape(), t >= 0.5 ? std::numeric_limits<double>::infinity() : 0.0);
    };
    try {
      euler_integrate(blowup, x0, c, 4);
      FAIL("expected a numeric error");
    } catch (const NumericError& err) {
      CHECK(err.step() == 2);
    }
    CHECK_THROWS_AS(euler_integrate(constant, x0, c, 0), ArgumentError);
  }

  TEST_CASE("advantages") {
    const auto a = grpo_advantages(std::vector<double>{1, 2, 3, 4}, 0.0);
    const double expected[] = {-1.3416407864998738178, -0.44721359549995793928, 0.44721359549995793928,
                               1.3416407864998738178};
    for (int k = 0; k < 4; ++k) CHECK(std::abs(a[k] - expected[k]) <= 1e-9);

    for (double v : grpo_advantages(std::vector<double>{0.3, 0.3, 0.3})) CHECK(v == 0.0);

    const double r = 0.6, eps = 1e-3;
    const auto two = grpo_advantages(std::vector<double>{0.0, r}, eps);
    const double amp = (r / 2) / (r / 2 + eps);
    CHECK(std::abs(two[0] + amp) <= 1e-12);
    CHECK(std::abs(two[1] - amp) <= 1e-12);

    CHECK_THROWS_AS(grpo_advantages(std::vector<double>{1.0}), ArgumentError);
  }

  TEST_CASE("weights") {
    const auto w = grpo_weights(std::vector<double>{-1.0, 1.0}, 1.0);
    CHECK(std::abs(w[0] - 0.23840584404423511188) <= 1e-9);
    CHECK(std::abs(w[1] - 1.7615941559557648881) <= 1e-9);

    for (double v : grpo_weights(std::vector<double>(4, 0.0))) CHECK(v == 1.0);

    const std::vector<double> adv{-1.2, 0.1, 0.4, 0.7};
    const auto hot = grpo_weights(adv, 1e3);
    const auto warm = grpo_weights(adv, 1.0);
    double spread_hot = 0, spread_warm = 0;
    for (int k = 0; k < 4; ++k) {
      spread_hot = std::max(spread_hot, std::abs(hot[k] - 1.0));
      spread_warm = std::max(spread_warm, std::abs(warm[k] - 1.0));
    }
    CHECK(spread_hot < 2e-3);
    CHECK(spread_hot < spread_warm);

    const auto big = grpo_weights(std::vector<double>{800.0, 0.0, -800.0}, 0.2);
    for (double v : big) CHECK(std::isfinite(v));
    CHECK(big[0] == doctest::Approx(3.0));

    CHECK_THROWS_AS(grpo_weights(adv, 0.0), DomainError);
    CHECK_THROWS_AS(grpo_weights(adv, -1.0), DomainError);
  }

  TEST_CASE("weights have unit mean") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> size(2, 16);
    for (int t = 0; t < 20000; ++t) {
      std::vector<double> r(size(rng));
      for (double& v : r) v = g(rng);
      const auto w = grpo_weights(grpo_advantages(r), 0.05 + std::abs(g(rng)));
      CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) / w.size() - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("mean-field update") {
    const GridShape s(2, 2);
    MeanFieldPolicy p = MeanFieldPolicy::centered(s);
    p.mean_z(0, 1) = 0.2;
    GrpoGroup g;
    for (double d : {-0.1, 0.1}) {
      Field z = p.mean_z;
      for (double& v : z.values()) v += d;
      g.z.push_back(z);
    }
    g.weights = {1.0, 1.0};
    const MeanFieldPolicy q = grpo_update(p, g);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) CHECK(std::abs(q.mean_z(i, j) - p.mean_z(i, j)) <= 1e-12);
    }
    CHECK(q.noise_scale == p.noise_scale);

    g.weights = {0.0, 2.0};
    const MeanFieldPolicy r = grpo_update(p, g);
    CHECK(r.mean_z(1, 1) == doctest::Approx(p.learning_rate * 2.0 / 2.0 * 0.1).epsilon(1e-12));
  }

  TEST_CASE("toy one-dimensional reward converges") {
    MeanFieldPolicy p = MeanFieldPolicy::centered(GridShape(1, 1));
    p.learning_rate = 0.5;
    std::mt19937_64 rng(4);
    int groups = 0;
    for (; groups < 200; ++groups) {
      GrpoGroup g;
      for (int k = 0; k < 8; ++k) {
        g.z.push_back(p.sample(rng));
        const double z = g.z.back()(0, 0);
        g.rewards.push_back(-(z - 0.3) * (z - 0.3));
      }
      score_group(g);
      p = grpo_update(p, g);
    }
    CHECK(std::abs(p.mean_z(0, 0) - 0.3) < 0.05);
  }

  TEST_CASE("policy sampling maps into the ratio box") {
    MeanFieldPolicy p = MeanFieldPolicy::centered(GridShape(3, 3));
    p.mean_z(0, 0) = 0.98;
    std::mt19937_64 rng(1);
    for (int k = 0; k < 50; ++k) CHECK(MeanFieldPolicy::to_ratio(p.sample(rng)).in_box(0.1, 10.0));
  }

  TEST_CASE("rollouts") {
    const auto sample = testing::feasible_samples(GridShape(4, 4), 1, 6).front();
    const Evaluator ev = Evaluator::for_target(sample.y, GridShape(4, 4), kPi / 3);
    std::mt19937_64 rng(2);
    std::uint64_t calls = 0;

    const GrpoGroup g = grpo_rollout(MeanFieldPolicy::centered(GridShape(4, 4)), ev, 4, rng, calls);
    CHECK(calls == 4);
    CHECK(g.rewards.size() == 4);
    CHECK(*std::max_element(g.rewards.begin(), g.rewards.end()) >= g.mu);

    // Ratios pinned at 10 never decode on this grid.
    MeanFieldPolicy pinned = MeanFieldPolicy::centered(GridShape(4, 4));
    pinned.noise_scale = 0.0;
    for (double& v : pinned.mean_z.values()) v = 1.0;
    if (!ev.evaluate(RatioField::constant(GridShape(4, 4), 10.0)).simulated) {
      const GrpoGroup bad = grpo_rollout(pinned, ev, 4, rng, calls);
      CHECK(calls == 8);
      for (double r : bad.rewards) CHECK(r <= -2.0);
      for (double a : bad.advantages) CHECK(a == 0.0);
      for (double w : bad.weights) CHECK(w == 1.0);
    }
  }

  TEST_CASE("training loop spends exactly the call budget") {
    const auto sample = testing::feasible_samples(GridShape(3, 3), 1, 8).front();
    const Evaluator ev = Evaluator::for_target(sample.y, GridShape(3, 3), kPi / 3);
    MeanFieldPolicy p = MeanFieldPolicy::centered(GridShape(3, 3));
    GrpoConfig cfg;
    cfg.calls = 40;
    cfg.seed = 3;
    int rows = 0;
    const auto trace = grpo_train(p, ev, cfg, [&](const GrpoTraceRow&) { ++rows; });
    CHECK(trace.size() == 10);
    CHECK(rows == 10);
    CHECK(trace.back().call_count == 40);
    const std::string js = trace_row_json(trace.front());
    CHECK(js.find("\"call_count\":4") != std::string::npos);
  }
}
