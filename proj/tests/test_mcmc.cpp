#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "skewfit/divergence.hpp"
#include "skewfit/mcmc.hpp"
#include "skewfit/special.hpp"

using namespace skewfit;

namespace {

ModelSpec gaussian_target(const Vector& mu, const Vector& sd) {
  ModelSpec s;
  s.dim = static_cast<int>(mu.size());
  s.log_prior = [](const Vector&) { return 0.0; };
  s.log_lik = [mu, sd](const Vector& t) {
    return -0.5 * (t - mu).cwiseQuotient(sd).squaredNorm();
  };
  s.grad = [mu, sd](const Vector& t) -> Vector {
    return -(t - mu).cwiseQuotient(sd.cwiseAbs2());
  };
  return s;
}

std::vector<Matrix> iid_chains(int m, int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z(0, 1);
  std::vector<Matrix> out(m, Matrix(n, d));
  for (auto& c : out)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) c(i, j) = z(rng);
  return out;
}

McmcConfig small_config(McmcAlgorithm a) {
  McmcConfig cfg;
  cfg.algorithm = a;
  cfg.n_keep = 4000;
  cfg.n_warmup = 1000;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST_SUITE("mcmc") {

TEST_CASE("diagnostics on iid normal chains") {
  const auto chains = iid_chains(4, 5000, 2, 1);
  const auto d = diagnostics(chains);
  for (int j = 0; j < 2; ++j) {
    CHECK(d.r_hat(j) >= 0.999);
    CHECK(d.r_hat(j) <= 1.005);
    CHECK(d.ess(j) == doctest::Approx(20000).epsilon(0.1));
    CHECK(d.ess(j) <= 20000);
  }
}

TEST_CASE("offset chains inflate R-hat") {
  auto chains = iid_chains(4, 1000, 1, 2);
  for (int k = 0; k < 4; ++k) chains[k].array() += 3.0 * k;
  CHECK(diagnostics(chains).r_hat(0) > 1.1);
}

TEST_CASE("constant chains: ESS is the draw count and R-hat is undefined") {
  std::vector<Matrix> chains(3, Matrix::Constant(500, 1, 2.0));
  const auto d = diagnostics(chains);
  CHECK(d.ess(0) == 1500);
  CHECK_FALSE(d.r_hat_defined[0]);
  CHECK(std::isnan(d.r_hat(0)));
  const auto j = d.to_json();
  CHECK(j.at("r_hat")[0].is_null());
}

TEST_CASE("config validation") {
  McmcConfig cfg;
  cfg.n_chains = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = McmcConfig{};
  cfg.n_keep = 999;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = McmcConfig{};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("HMC on a Gaussian target") {
  Vector mu(3), sd(3);
  mu << 1.0, -2.0, 0.5;
  sd << 0.5, 2.0, 1.0;
  const auto res = hmc_sample(gaussian_target(mu, sd), small_config(McmcAlgorithm::hmc), mu);
  const Matrix all = res.pooled();
  for (int j = 0; j < 3; ++j) {
    const double mean = all.col(j).mean();
    const double se = sd(j) / std::sqrt(res.diagnostics.ess(j));
    CHECK(std::abs(mean - mu(j)) < 4 * se);
    const double var = (all.col(j).array() - mean).square().mean();
    CHECK(std::sqrt(var) == doctest::Approx(sd(j)).epsilon(0.05));
  }
  for (double a : res.diagnostics.accept_rate) {
    CHECK(a >= 0.6);
    CHECK(a <= 0.95);
  }
  CHECK(std::abs(res.diagnostics.mean_energy_change) < 0.1);
  CHECK(res.diagnostics.max_r_hat() < 1.01);
}

TEST_CASE("chains are bitwise reproducible") {
  Vector mu = Vector::Zero(2), sd = Vector::Ones(2);
  const auto cfg = small_config(McmcAlgorithm::hmc);
  const auto a = hmc_sample(gaussian_target(mu, sd), cfg, mu);
  const auto b = hmc_sample(gaussian_target(mu, sd), cfg, mu);
  for (std::size_t k = 0; k < a.chains.size(); ++k) CHECK(a.chains[k] == b.chains[k]);
  const auto r1 = rwm_sample(gaussian_target(mu, sd), small_config(McmcAlgorithm::rwm), mu);
  const auto r2 = rwm_sample(gaussian_target(mu, sd), small_config(McmcAlgorithm::rwm), mu);
  CHECK(r1.pooled() == r2.pooled());
}

TEST_CASE("RWM quantiles on a 1D Poisson posterior match the grid CDF") {
  const GlmModel m = testutil::random_glm(Family::poisson_log, 6, Vector::Constant(1, 0.5), 3);
  const ModelSpec spec = m.spec();
  const auto la = fit_laplace(spec, Vector::Zero(1));
  auto cfg = small_config(McmcAlgorithm::rwm);
  cfg.n_keep = 10000;
  const auto res = rwm_sample(spec, cfg, la.center());
  const Matrix pooled = res.pooled();
  std::vector<double> draws(pooled.data(), pooled.data() + pooled.size());

  QuadratureGrid g(default_grid(la.center(), la.covariance(), 14.0, 8192));
  auto lp = g.evaluate([&](const Vector& t) { return log_unnorm_posterior(spec, t); });
  const double lz = g.log_integral(lp);
  std::vector<double> x(g.size()), dens(g.size()), cdf(g.size(), 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    x[k] = g.point(k)(0);
    dens[k] = std::exp(lp[k] - lz);
    if (k > 0) cdf[k] = cdf[k - 1] + 0.5 * (dens[k] + dens[k - 1]) * (x[k] - x[k - 1]);
  }
  const double ess = res.diagnostics.ess(0);
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), p);
    const std::size_t k = it - cdf.begin();
    const double q_true = x[k - 1] + (p - cdf[k - 1]) / (cdf[k] - cdf[k - 1]) * (x[k] - x[k - 1]);
    const double se = std::sqrt(p * (1 - p) / ess) / dens[k];
    CHECK(std::abs(quantile_type7(draws, p) - q_true) < 3 * se);
  }
}

TEST_CASE("RWM on a Gaussian target recovers the covariance") {
  Vector mu(2), sd(2);
  mu << 0.0, 3.0;
  sd << 1.0, 0.1;
  auto cfg = small_config(McmcAlgorithm::rwm);
  cfg.n_keep = 20000;
  const auto res = rwm_sample(gaussian_target(mu, sd), cfg, mu);
  const Matrix all = res.pooled();
  for (int j = 0; j < 2; ++j) {
    const double se = sd(j) / std::sqrt(res.diagnostics.ess(j));
    CHECK(std::abs(all.col(j).mean() - mu(j)) < 4 * se);
  }
}

TEST_CASE("HMC posterior mean on a 2D logistic model matches quadrature") {
  Vector truth(2);
  truth << 0.5, -1.0;
  const GlmModel m = testutil::random_glm(Family::bernoulli_logit, 100, truth, 12);
  const ModelSpec spec = m.spec();
  const auto la = fit_laplace(spec, Vector::Zero(2));
  QuadratureGrid g(default_grid(la.center(), la.covariance(), 10.0, 256));
  const auto lp = g.evaluate([&](const Vector& t) { return log_unnorm_posterior(spec, t); });
  const double lz = g.log_integral(lp);
  Vector mean = Vector::Zero(2);
  for (std::size_t k = 0; k < g.size(); ++k) mean += g.weights()[k] * std::exp(lp[k] - lz) * g.point(k);

  const auto res = hmc_sample(spec, small_config(McmcAlgorithm::hmc), la.center());
  const Matrix all = res.pooled();
  for (int j = 0; j < 2; ++j) {
    const double m_j = all.col(j).mean();
    const double sd = std::sqrt((all.col(j).array() - m_j).square().mean());
    CHECK(std::abs(m_j - mean(j)) < 3 * sd / std::sqrt(res.diagnostics.ess(j)));
  }
}

}
