#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skewfit/model.hpp"
#include "skewfit/symmetric.hpp"

namespace skewfit {

/// 2 * center - theta.
Vector mirror(const Vector& theta, const Vector& center);

/// Skewness-inducing factor
///   w(theta) = p(theta) / (p(theta) + p(2 center - theta)),
/// p the unnormalized posterior, evaluated as logistic of the log-density
/// difference. For GLM targets the linear predictor at the center is
/// precomputed once so the fast path needs a single X (theta - center).
class SkewnessFactor {
 public:
  SkewnessFactor(ModelSpec model, Vector center);
  SkewnessFactor(const GlmModel& glm, Vector center);

  const ModelSpec& model() const { return model_; }
  const Vector& center() const { return center_; }
  bool has_linear_predictor() const { return glm_.has_value(); }
  const Vector& precomputed_eta() const;

  /// log p(theta) - log p(mirror(theta)); +inf / -inf at one-sided support
  /// boundaries, NaN when both sides are off support.
  double log_ratio(const Vector& theta) const;
  double log_ratio_fast(const Vector& theta) const;

 private:
  friend double skew_factor_fast(const SkewnessFactor&, const GlmModel&, const Vector&);
  ModelSpec model_;
  Vector center_;
  std::optional<GlmModel> glm_;
  Vector eta_center_;
  std::uint64_t center_fingerprint_ = 0;
};

/// Hash of the bytes of a vector; guards the precomputed predictor.
std::uint64_t fingerprint(const Vector& v);

/// w(theta) in [0, 1]. Both sides off support gives 0.5; only the mirror
/// off support gives 1, only theta gives 0.
double skew_factor(const SkewnessFactor& f, const Vector& theta);

/// Same value through the precomputed linear predictor. Throws StateError
/// if the factor was not built from `model` or the cache is stale.
double skew_factor_fast(const SkewnessFactor& f, const GlmModel& model, const Vector& theta);

/// Map Delta -> w with the support conventions above.
double factor_from_log_ratio(double delta);

/// Floating-point operations spent on linear predictors per factor
/// evaluation: naive (two full X theta products) and fast (one X h plus the
/// two n-vector combinations).
struct PredictorOpCount {
  std::uint64_t naive = 0;
  std::uint64_t fast = 0;
};
PredictorOpCount predictor_op_count(int n_obs, int dim);

/// q(theta) = 2 f(theta) w(theta).
class SkewSymmetricApproximation {
 public:
  SkewSymmetricApproximation(SymmetricApproximation symmetric, SkewnessFactor factor);

  const SymmetricApproximation& symmetric() const { return symmetric_; }
  const SkewnessFactor& factor() const { return factor_; }
  const Vector& center() const { return symmetric_.center(); }
  int dim() const { return symmetric_.dim(); }

  /// Factor through the fast path when the target is a GLM.
  double weight(const Vector& theta) const;

 private:
  SymmetricApproximation symmetric_;
  SkewnessFactor factor_;
};

/// Build the skewed counterpart, picking the GLM fast path when available.
SkewSymmetricApproximation make_skew(const SymmetricApproximation& base, const ModelSpec& model);
SkewSymmetricApproximation make_skew(const SymmetricApproximation& base, const GlmModel& model);

/// log 2 + log f(theta) + log w(theta); -inf where w or f vanish.
double skew_logpdf(const SkewSymmetricApproximation& q, const Vector& theta);

/// Optional record of the sampler's internal draws.
struct SamplerTrace {
  std::vector<Vector> proposals;  // theta_temp
  std::vector<double> weights;    // w(theta_temp)
  std::vector<double> uniforms;
  std::vector<bool> kept;         // true: theta_temp returned, false: mirrored
};

/// Rejection-free i.i.d. sampler: draw from f, keep with probability
/// w(theta_temp), otherwise reflect through the center.
std::vector<Vector> sample_skew(const SkewSymmetricApproximation& q, int n_samples, Rng& rng,
                                SamplerTrace* trace = nullptr);

/// Samples as an n x d matrix.
Matrix stack_samples(const std::vector<Vector>& samples);

/// CSV: header of column names, one row per draw.
void write_samples_csv(const std::string& path, const Matrix& samples,
                       const std::vector<std::string>& names);
Matrix read_samples_csv(const std::string& path, std::vector<std::string>* names = nullptr);

/// Binary container: 16-byte little-endian header {magic "SKWS", u32
/// version, u32 n, u32 d} followed by the column-major float64 payload.
void write_samples_binary(const std::string& path, const Matrix& samples);
Matrix read_samples_binary(const std::string& path);

}  // namespace skewfit
