#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "skewfit/model.hpp"

namespace skewfit {

enum class McmcAlgorithm { rwm, hmc };

struct McmcConfig {
  int n_chains = 4;
  int n_warmup = 2000;
  int n_keep = 10000;
  std::uint64_t seed = 1;
  McmcAlgorithm algorithm = McmcAlgorithm::hmc;
  int hmc_leapfrog_steps = 32;
  double target_accept = 0.8;

  /// n_chains >= 2, n_keep >= 1000, n_warmup >= 100.
  void validate() const;
};

struct ChainDiagnostics {
  Vector r_hat;  // NaN where undefined (zero pooled variance)
  Vector ess;
  std::vector<double> accept_rate;
  std::vector<bool> r_hat_defined;
  int divergences = 0;
  double mean_energy_change = 0.0;
  std::vector<std::string> warnings;

  double max_r_hat() const;
  nlohmann::json to_json() const;
};

struct McmcResult {
  std::vector<Matrix> chains;  // each n_keep x d
  ChainDiagnostics diagnostics;

  /// All kept draws, chains stacked in index order.
  Matrix pooled() const;
};

/// Adaptive Gaussian random-walk Metropolis started at `init` (the MAP).
McmcResult rwm_sample(const ModelSpec& model, const McmcConfig& cfg, const Vector& init);

/// Leapfrog HMC with jittered path length, diagonal metric from warmup
/// variances, and dual-averaging step size.
McmcResult hmc_sample(const ModelSpec& model, const McmcConfig& cfg, const Vector& init);

/// Dispatch on cfg.algorithm.
McmcResult run_mcmc(const ModelSpec& model, const McmcConfig& cfg, const Vector& init);

/// Split R-hat and multi-chain autocorrelation ESS per coordinate.
ChainDiagnostics diagnostics(const std::vector<Matrix>& chains);

}  // namespace skewfit
