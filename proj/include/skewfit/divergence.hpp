#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "skewfit/model.hpp"
#include "skewfit/symmetric.hpp"

namespace skewfit {

/// Tensor-product grid on [lo, hi] for d <= 2.
struct GridSpec {
  Vector lo;
  Vector hi;
  int points_per_dim = 4096;

  int dim() const { return static_cast<int>(lo.size()); }
  void validate() const;
  nlohmann::json to_json() const;
};

/// Grid centred at `center` spanning +/- `width` standard deviations taken
/// from the diagonal of `covariance`. Defaults: 4096 points in 1D, 512 in 2D.
GridSpec default_grid(const Vector& center, const Matrix& covariance, double width = 12.0,
                      int points_per_dim = 0);

enum class DivergenceKind { tv, alpha, kl_forward, kl_reverse };
enum class EstimateMethod { quadrature, monte_carlo };

std::string to_string(DivergenceKind k);

struct DivergenceEstimate {
  double value = 0.0;
  DivergenceKind kind = DivergenceKind::tv;
  double alpha = 0.0;  // meaningful for DivergenceKind::alpha only
  EstimateMethod method = EstimateMethod::quadrature;
  double err_estimate = 0.0;
  std::optional<GridSpec> grid;

  nlohmann::json to_json() const;
};

/// Grid nodes and trapezoid weights, plus the half-resolution weights used
/// for the refinement error estimate.
class QuadratureGrid {
 public:
  explicit QuadratureGrid(GridSpec spec);

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return weights_.size(); }
  Vector point(std::size_t k) const;
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& coarse_weights() const { return coarse_; }

  std::vector<double> evaluate(const LogDensityFn& log_density) const;
  /// log of the trapezoid integral of exp(log_values).
  double log_integral(std::span<const double> log_values) const;

 private:
  GridSpec spec_;
  std::vector<std::vector<double>> axes_;
  std::vector<double> weights_;
  std::vector<double> coarse_;
};

/// Log density of the average of p at theta and at its mirror image.
LogDensityFn symmetrize_logpdf(LogDensityFn log_p, Vector center);

/// Shift an unnormalized log density so that it integrates to one on `grid`.
LogDensityFn normalize_on_grid(const LogDensityFn& log_p, const QuadratureGrid& grid);

// Each estimator exists in two forms: from density callbacks, and from log
// values already evaluated on a QuadratureGrid (the battery reuses them).
DivergenceEstimate tv_grid(const LogDensityFn& log_p, const LogDensityFn& log_q,
                           const GridSpec& grid);
DivergenceEstimate tv_grid(const QuadratureGrid& grid, std::span<const double> lp,
                           std::span<const double> lq);

/// [1 - int p^a q^(1-a)] / (a (1-a)); a in {0, 1} is rejected.
DivergenceEstimate alpha_div_grid(const LogDensityFn& log_p, const LogDensityFn& log_q,
                                  double alpha, const GridSpec& grid);
DivergenceEstimate alpha_div_grid(const QuadratureGrid& grid, std::span<const double> lp,
                                  std::span<const double> lq, double alpha);

enum class KlDirection { forward, reverse };
/// forward: int p log(p/q); reverse: int q log(q/p).
DivergenceEstimate kl_grid(const LogDensityFn& log_p, const LogDensityFn& log_q,
                           KlDirection direction, const GridSpec& grid);
DivergenceEstimate kl_grid(const QuadratureGrid& grid, std::span<const double> lp,
                           std::span<const double> lq, KlDirection direction);

/// Importance-sampling TV estimate: 0.5 E_q |p/q - 1| with p normalized by
/// the importance-sampling estimate of its constant.
DivergenceEstimate tv_mc(const LogDensityFn& log_p_unnorm,
                         const std::function<Vector(Rng&)>& q_sampler,
                         const LogDensityFn& q_logpdf, int n_samples, Rng& rng);

/// w(theta) = logistic(a' z + b (u' z)^3), z = L^{-1}(theta - center): an odd
/// argument, so w(theta) + w(2 center - theta) = 1.
class RandomSkewingFunction {
 public:
  RandomSkewingFunction(const Vector& center, const Matrix& covariance, Rng& rng);
  double operator()(const Vector& theta) const;
  double log_value(const Vector& theta) const;
  /// log w at each column of a d x N matrix.
  Vector log_values(const Matrix& points) const;

 private:
  double argument(const Vector& theta) const;
  Vector center_;
  Matrix factor_;
  Vector a_;
  Vector u_;
  double b_ = 0.0;
};

}  // namespace skewfit
