#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "kiri/solvers.hpp"

namespace kiri {

int cmaes_population(int dim) { return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dim)))); }

// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu updates and cumulative step-size adaptation.
SolverRun solve_cmaes(Problem& problem, const StopRule& stop, std::uint64_t seed, const CmaesConfig& cfg) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const auto t0 = std::chrono::steady_clock::now();
  Tracker tr(problem, stop);
  const int n = tr.dim();
  const Bounds b = tr.bounds();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int lambda = cfg.population > 0 ? cfg.population : cmaes_population(n);
  const int mu = lambda / 2;
  VectorXd w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  w /= w.sum();
  const double mueff = 1.0 / w.squaredNorm();
  const double dn = static_cast<double>(n);
  const double cc = (4.0 + mueff / dn) / (dn + 4.0 + 2.0 * mueff / dn);
  const double cs = (mueff + 2.0) / (dn + mueff + 5.0);
  const double c1 = 2.0 / ((dn + 1.3) * (dn + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((dn + 2.0) * (dn + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (dn + 1.0)) - 1.0) + cs;
  const double chi_n = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));

  VectorXd mean(n);
  for (int i = 0; i < n; ++i) mean[i] = b.lo + b.width() * uni(rng);
  double sigma = cfg.sigma0_fraction * b.width();
  MatrixXd C = MatrixXd::Identity(n, n);
  MatrixXd B = MatrixXd::Identity(n, n);
  VectorXd D = VectorXd::Ones(n);
  VectorXd pc = VectorXd::Zero(n), ps = VectorXd::Zero(n);

  std::vector<VectorXd> xs(lambda, VectorXd(n)), ys(lambda, VectorXd(n));
  std::vector<double> fit(lambda);
  std::vector<int> order(lambda);
  VectorXd z(n);
  std::string reason = "cap";
  int gen = 0;

  while (true) {
    int evaluated = 0;
    for (int k = 0; k < lambda; ++k) {
      bool inside = false;
      for (int attempt = 0; attempt <= cfg.max_resamples && !inside; ++attempt) {
        for (int i = 0; i < n; ++i) z[i] = gauss(rng);
        ys[k] = B * D.cwiseProduct(z);
        xs[k] = mean + sigma * ys[k];
        inside = (xs[k].array() >= b.lo).all() && (xs[k].array() <= b.hi).all();
      }
      if (!inside) {
        xs[k] = xs[k].cwiseMax(b.lo).cwiseMin(b.hi);
      }
      const auto v = tr.eval(std::span<const double>(xs[k].data(), n));
      if (!v) break;
      fit[k] = *v;
      ++evaluated;
    }
    if (evaluated < lambda) break;
    ++gen;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int c) { return fit[a] < fit[c]; });
    VectorXd yw = VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) yw += w[i] * ys[order[i]];
    mean += sigma * yw;

    // C^{-1/2} yw = B D^{-1} B^T yw
    const VectorXd cinv_yw = B * (B.transpose() * yw).cwiseQuotient(D);
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * cinv_yw;
    const double ps_norm = ps.norm();
    const bool hsig = ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * gen)) / chi_n < 1.4 + 2.0 / (dn + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * yw;

    MatrixXd rank_mu = MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) rank_mu.noalias() += w[i] * ys[order[i]] * ys[order[i]].transpose();
    const double delta_h = hsig ? 0.0 : cc * (2.0 - cc);
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + delta_h * C) + cmu * rank_mu;
    sigma *= std::exp((cs / damps) * (ps_norm / chi_n - 1.0));
    sigma = std::min(sigma, 1e3 * b.width());

    C = 0.5 * (C + C.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
    B = eig.eigenvectors();
    D = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();

    // The generation's best sample is CMA-ES's own incumbent; it only settles once the distribution has contracted.
    if (tr.end_iteration(std::span<const double>(xs[order[0]].data(), n), tr.best_value())) {
      reason = "tolerance";
      break;
    }
    if (tr.exhausted()) break;
  }
  SolverRun run = tr.finish("cmaes", seed, reason);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

}  // namespace kiri
