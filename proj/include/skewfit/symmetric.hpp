#pragma once

#include <cstdint>
#include <memory>
#include "json.hpp"
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "skewfit/model.hpp"

namespace skewfit {

using Rng = std::mt19937_64;

enum class ApproxKind { laplace, gvb, gep, snp };

std::string to_string(ApproxKind k);
ApproxKind approx_kind_from_string(const std::string& name);

/// Multivariate normal stored through the lower Cholesky factor of its
/// covariance.
class GaussianApproximation {
 public:
  /// Throws IndefiniteCurvatureError if `covariance` is not SPD.
  GaussianApproximation(Vector mean, Matrix covariance);
  static GaussianApproximation from_precision(Vector mean, const Matrix& precision);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  const Matrix& covariance_factor() const { return factor_; }
  double log_norm_const() const { return log_norm_const_; }

  double log_pdf(const Vector& theta) const;
  Vector draw(Rng& rng) const;

 private:
  Vector mean_;
  Matrix covariance_;
  Matrix factor_;
  double log_norm_const_ = 0.0;
};

/// Gaussian times the non-negative even polynomial
///   P(h) = 1 + a + a^2/2 + b^2/2,  a = <l4, h^4>/24,  b = <l3, h^3>/6,
/// normalized by E[P(h)] under the Gaussian. Restricted to d <= 2.
class SnpApproximation {
 public:
  SnpApproximation(Vector mode, const Matrix& covariance, DerivativeTensor l3,
                   DerivativeTensor l4);

  int dim() const { return gauss_.dim(); }
  const Vector& mode() const { return gauss_.mean(); }
  const Matrix& covariance() const { return gauss_.covariance(); }
  const Matrix& precision() const { return precision_; }
  const DerivativeTensor& l3() const { return l3_; }
  const DerivativeTensor& l4() const { return l4_; }
  double poly_normalizer() const { return poly_normalizer_; }

  double polynomial(const Vector& h) const;
  double log_pdf(const Vector& theta) const;
  Vector draw(Rng& rng) const;

 private:
  void prepare_sampler();

  GaussianApproximation gauss_;
  Matrix precision_;
  DerivativeTensor l3_, l4_;
  double poly_normalizer_ = 1.0;
  // 1D inverse-CDF table.
  std::vector<double> grid_, cdf_;
  // 2D rejection sampler: N(0, inflation^2 I) in whitened coordinates.
  double inflation_ = 1.5;
  double log_envelope_ = 0.0;
};

/// Everything a fitter reports besides the density itself.
struct FitDiagnostics {
  int iterations = 0;
  bool converged = true;
  double gradient_norm = 0.0;
  std::vector<double> elbo_trace;
  int clipped_sites = 0;
  int skipped_sites = 0;
};

/// A density symmetric about `center()` with exact sampler.
class SymmetricApproximation {
 public:
  SymmetricApproximation(ApproxKind kind, GaussianApproximation gauss);
  explicit SymmetricApproximation(SnpApproximation snp);

  ApproxKind kind() const { return kind_; }
  int dim() const;
  const Vector& center() const;
  double log_pdf(const Vector& theta) const;
  Vector draw(Rng& rng) const;

  /// Null unless the density is Gaussian (laplace, gvb, gep).
  const GaussianApproximation* gaussian() const;
  const SnpApproximation* snp() const;
  /// Covariance of the Gaussian part (the base Gaussian for SNP).
  const Matrix& covariance() const;

  FitDiagnostics diagnostics;

  nlohmann::json to_json() const;
  static SymmetricApproximation from_json(const nlohmann::json& j);

 private:
  ApproxKind kind_;
  std::variant<GaussianApproximation, SnpApproximation> density_;
};

struct LaplaceOptions {
  double grad_tol = 1e-8;
  int max_iter = 200;
  double armijo_c = 1e-4;
};

struct GvbOptions {
  int iterations = 5000;
  int mc_samples = 8;
  double step_size = 0.1;
  double rms_weight = 0.1;  // weight of the newest squared gradient
  /// Iterates from this fraction of the run on are averaged into the result.
  double average_from = 0.5;
  std::uint64_t seed = 1;
};

struct EpOptions {
  double damping = 0.5;  // weight on the previous site value
  double tol = 1e-10;
  int max_sweeps = 500;
  int quadrature_points = 64;
};

/// Damped Newton MAP search followed by the Gaussian with covariance
/// (-Hessian)^{-1} at the mode.
SymmetricApproximation fit_laplace(const ModelSpec& model, const Vector& init,
                                   const LaplaceOptions& opts = {});

/// Full-rank Gaussian VB by stochastic reparameterized ELBO ascent.
SymmetricApproximation fit_gvb(const ModelSpec& model, const GaussianApproximation& init,
                               const GvbOptions& opts = {});

/// Scalar Gaussian sites on the linear predictors eta_i = x_i' theta.
struct EpSiteSet {
  Vector site_precisions;
  Vector site_shifts;
  Vector global_mean;
  Matrix global_covariance;
};

/// Global Gaussian recomputed from the prior and the sites.
GaussianApproximation ep_global_from_sites(const GlmModel& model, const Vector& precisions,
                                           const Vector& shifts);

struct EpResult {
  EpSiteSet sites;
  SymmetricApproximation approximation;
};

EpResult fit_gep_sites(const GlmModel& model, const EpOptions& opts = {});
SymmetricApproximation fit_gep(const GlmModel& model, const EpOptions& opts = {});

/// Tilted moments of N(eta; cavity_mean, cavity_var) * exp(g(y, eta)).
struct TiltedMoments {
  double mean;
  double var;
};
TiltedMoments tilted_moments(Family family, double y, double cavity_mean, double cavity_var,
                             int quadrature_points = 64);

/// Semi-nonparametric refinement of a Laplace approximation (d <= 2).
SymmetricApproximation build_snp(const ModelSpec& model, const SymmetricApproximation& laplace);

/// Isserlis-based E[h1^p h2^q] for h ~ N(0, cov), d <= 2.
double gaussian_moment(int p, int q, const Matrix& cov);

}  // namespace skewfit
