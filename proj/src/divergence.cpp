#include "skewfit/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skewfit/skew.hpp"
#include "skewfit/special.hpp"

namespace skewfit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMassTolerance = 1e-6;

std::vector<double> trapezoid_axis_weights(int n, double h, int stride) {
  std::vector<double> w(n, 0.0);
  int last = ((n - 1) / stride) * stride;
  for (int i = 0; i <= last; i += stride) w[i] = stride * h;
  w[0] *= 0.5;
  w[last] *= 0.5;
  return w;
}

void check_sizes(const QuadratureGrid& grid, std::span<const double> a,
                 std::span<const double> b) {
  if (a.size() != grid.size() || b.size() != grid.size()) {
    throw std::invalid_argument("grid values have the wrong length");
  }
}

void check_mass(const QuadratureGrid& grid, std::span<const double> lp, const char* which) {
  const double mass = std::exp(grid.log_integral(lp));
  const double deficit = std::abs(1.0 - mass);
  if (!(deficit < kMassTolerance)) {
    throw DomainTooSmallError(std::string("density ") + which + " integrates to " +
                                  std::to_string(mass) + " on the grid (deficit " +
                                  std::to_string(deficit) + ")",
                              deficit);
  }
}

template <typename F>
std::pair<double, double> fine_and_coarse(const QuadratureGrid& grid, F&& term) {
  double fine = 0.0, coarse = 0.0;
  const auto& w = grid.weights();
  const auto& wc = grid.coarse_weights();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (w[k] == 0.0 && wc[k] == 0.0) continue;
    const double t = term(k);
    fine += w[k] * t;
    coarse += wc[k] * t;
  }
  return {fine, coarse};
}
}  // namespace

// ---------------------------------------------------------------------------
// Grid

void GridSpec::validate() const {
  if (lo.size() != hi.size() || lo.size() < 1 || lo.size() > 2) {
    throw std::invalid_argument("grid must be 1- or 2-dimensional");
  }
  if ((lo.array() >= hi.array()).any()) throw std::invalid_argument("grid needs lo < hi");
  if (points_per_dim < 64) throw std::invalid_argument("grid needs at least 64 points per dim");
}

nlohmann::json GridSpec::to_json() const {
  return {{"lo", std::vector<double>(lo.data(), lo.data() + lo.size())},
          {"hi", std::vector<double>(hi.data(), hi.data() + hi.size())},
          {"points", points_per_dim}};
}

GridSpec default_grid(const Vector& center, const Matrix& covariance, double width,
                      int points_per_dim) {
  GridSpec g;
  const Vector sd = covariance.diagonal().cwiseSqrt();
  g.lo = center - width * sd;
  g.hi = center + width * sd;
  g.points_per_dim = points_per_dim > 0 ? points_per_dim : (center.size() == 1 ? 4096 : 512);
  g.validate();
  return g;
}

QuadratureGrid::QuadratureGrid(GridSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const int d = spec_.dim();
  const int n = spec_.points_per_dim;
  std::vector<std::vector<double>> wf(d), wc(d);
  axes_.resize(d);
  for (int j = 0; j < d; ++j) {
    const double h = (spec_.hi(j) - spec_.lo(j)) / (n - 1);
    axes_[j].resize(n);
    for (int i = 0; i < n; ++i) {
      axes_[j][i] = spec_.lo(j) + (spec_.hi(j) - spec_.lo(j)) * i / (n - 1);
    }
    wf[j] = trapezoid_axis_weights(n, h, 1);
    wc[j] = trapezoid_axis_weights(n, h, 2);
  }
  if (d == 1) {
    weights_ = wf[0];
    coarse_ = wc[0];
  } else {
    weights_.resize(static_cast<std::size_t>(n) * n);
    coarse_.resize(weights_.size());
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        weights_[static_cast<std::size_t>(i) * n + k] = wf[0][i] * wf[1][k];
        coarse_[static_cast<std::size_t>(i) * n + k] = wc[0][i] * wc[1][k];
      }
    }
  }
}

Vector QuadratureGrid::point(std::size_t k) const {
  const int d = spec_.dim();
  Vector x(d);
  if (d == 1) {
    x(0) = axes_[0][k];
  } else {
    const std::size_t n = static_cast<std::size_t>(spec_.points_per_dim);
    x(0) = axes_[0][k / n];
    x(1) = axes_[1][k % n];
  }
  return x;
}

std::vector<double> QuadratureGrid::evaluate(const LogDensityFn& log_density) const {
  std::vector<double> out(size());
  for (std::size_t k = 0; k < size(); ++k) out[k] = log_density(point(k));
  return out;
}

double QuadratureGrid::log_integral(std::span<const double> log_values) const {
  double m = -kInf;
  for (double v : log_values) m = std::max(m, v);
  if (m == -kInf) return -kInf;
  if (m == kInf) return kInf;
  double s = 0.0;
  for (std::size_t k = 0; k < size(); ++k) s += weights_[k] * std::exp(log_values[k] - m);
  return m + std::log(s);
}

// ---------------------------------------------------------------------------

std::string to_string(DivergenceKind k) {
  switch (k) {
    case DivergenceKind::tv: return "tv";
    case DivergenceKind::alpha: return "alpha";
    case DivergenceKind::kl_forward: return "kl_forward";
    case DivergenceKind::kl_reverse: return "kl_reverse";
  }
  return "unknown";
}

nlohmann::json DivergenceEstimate::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  if (kind == DivergenceKind::alpha) j["alpha"] = alpha;
  j["method"] = method == EstimateMethod::quadrature ? "quadrature" : "monte_carlo";
  j["value"] = value;
  j["err_estimate"] = err_estimate;
  if (grid) j["grid"] = grid->to_json();
  return j;
}

LogDensityFn symmetrize_logpdf(LogDensityFn log_p, Vector center) {
  return [log_p = std::move(log_p), center = std::move(center)](const Vector& theta) {
    return log_add_exp(log_p(theta), log_p(mirror(theta, center))) - kLog2;
  };
}

LogDensityFn normalize_on_grid(const LogDensityFn& log_p, const QuadratureGrid& grid) {
  const double log_z = grid.log_integral(grid.evaluate(log_p));
  if (!std::isfinite(log_z)) throw EvaluationError("density has no finite mass on the grid");
  return [log_p, log_z](const Vector& theta) { return log_p(theta) - log_z; };
}

DivergenceEstimate tv_grid(const QuadratureGrid& grid, std::span<const double> lp,
                           std::span<const double> lq) {
  check_sizes(grid, lp, lq);
  check_mass(grid, lp, "p");
  check_mass(grid, lq, "q");
  const auto [fine, coarse] = fine_and_coarse(
      grid, [&](std::size_t k) { return std::abs(std::exp(lp[k]) - std::exp(lq[k])); });
  DivergenceEstimate e;
  e.kind = DivergenceKind::tv;
  e.value = 0.5 * fine;
  e.err_estimate = 0.5 * std::abs(fine - coarse);
  e.grid = grid.spec();
  return e;
}

DivergenceEstimate tv_grid(const LogDensityFn& log_p, const LogDensityFn& log_q,
                           const GridSpec& spec) {
  const QuadratureGrid grid(spec);
  return tv_grid(grid, grid.evaluate(log_p), grid.evaluate(log_q));
}

DivergenceEstimate alpha_div_grid(const QuadratureGrid& grid, std::span<const double> lp,
                                  std::span<const double> lq, double alpha) {
  if (alpha == 0.0 || alpha == 1.0) {
    throw std::invalid_argument("alpha-divergence is undefined at alpha = 0 or 1; use kl_grid");
  }
  check_sizes(grid, lp, lq);
  check_mass(grid, lp, "p");
  check_mass(grid, lq, "q");
  const auto [fine, coarse] = fine_and_coarse(grid, [&](std::size_t k) {
    if (lp[k] == -kInf && lq[k] == -kInf) return 0.0;
    return std::exp(alpha * lp[k] + (1.0 - alpha) * lq[k]);
  });
  const double scale = 1.0 / (alpha * (1.0 - alpha));
  DivergenceEstimate e;
  e.kind = DivergenceKind::alpha;
  e.alpha = alpha;
  e.value = scale * (1.0 - fine);
  e.err_estimate = std::abs(scale * (fine - coarse));
  e.grid = grid.spec();
  return e;
}

DivergenceEstimate alpha_div_grid(const LogDensityFn& log_p, const LogDensityFn& log_q,
                                  double alpha, const GridSpec& spec) {
  if (alpha == 0.0 || alpha == 1.0) {
    throw std::invalid_argument("alpha-divergence is undefined at alpha = 0 or 1; use kl_grid");
  }
  const QuadratureGrid grid(spec);
  return alpha_div_grid(grid, grid.evaluate(log_p), grid.evaluate(log_q), alpha);
}

DivergenceEstimate kl_grid(const QuadratureGrid& grid, std::span<const double> lp,
                           std::span<const double> lq, KlDirection direction) {
  check_sizes(grid, lp, lq);
  check_mass(grid, lp, "p");
  check_mass(grid, lq, "q");
  const auto& a = direction == KlDirection::forward ? lp : lq;
  const auto& b = direction == KlDirection::forward ? lq : lp;
  const auto [fine, coarse] = fine_and_coarse(grid, [&](std::size_t k) {
    const double pa = std::exp(a[k]);
    if (pa == 0.0) return 0.0;
    if (b[k] == -kInf || std::exp(b[k]) == 0.0) {
      if (pa > 1e-300) {
        throw SupportMismatchError("KL integrand: first density is positive where the second "
                                   "vanishes at grid point " +
                                   std::to_string(k));
      }
      return 0.0;
    }
    return pa * (a[k] - b[k]);
  });
  DivergenceEstimate e;
  e.kind = direction == KlDirection::forward ? DivergenceKind::kl_forward
                                              : DivergenceKind::kl_reverse;
  e.value = fine;
  e.err_estimate = std::abs(fine - coarse);
  e.grid = grid.spec();
  return e;
}

DivergenceEstimate kl_grid(const LogDensityFn& log_p, const LogDensityFn& log_q,
                           KlDirection direction, const GridSpec& spec) {
  const QuadratureGrid grid(spec);
  return kl_grid(grid, grid.evaluate(log_p), grid.evaluate(log_q), direction);
}

DivergenceEstimate tv_mc(const LogDensityFn& log_p_unnorm,
                         const std::function<Vector(Rng&)>& q_sampler,
                         const LogDensityFn& q_logpdf, int n_samples, Rng& rng) {
  if (n_samples < 2) throw std::invalid_argument("tv_mc needs at least two samples");
  std::vector<double> logr(n_samples);
  double m = -kInf;
  for (int s = 0; s < n_samples; ++s) {
    const Vector x = q_sampler(rng);
    logr[s] = log_p_unnorm(x) - q_logpdf(x);
    if (std::isnan(logr[s])) throw EvaluationError("importance weight is NaN");
    m = std::max(m, logr[s]);
  }
  if (!std::isfinite(m)) throw UnreliableEstimateError("all importance weights vanish");
  std::vector<double> r(n_samples);
  double sum = 0.0, sum_sq = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    r[s] = std::exp(logr[s] - m);
    sum += r[s];
    sum_sq += r[s] * r[s];
  }
  const double ess = sum * sum / sum_sq;
  if (ess < 50.0) {
    throw UnreliableEstimateError("importance-sampling ESS " + std::to_string(ess) +
                                  " is below 50");
  }
  const double n = n_samples;
  const double z = sum / n;  // E_q[r]
  double abs_sum = 0.0;
  for (double v : r) abs_sum += std::abs(v - z);
  const double a = abs_sum / n;
  const double ratio = a / z;
  // Delta method for the ratio of means a / z.
  double var = 0.0;
  for (double v : r) {
    const double t = std::abs(v - z) - ratio * v;
    var += t * t;
  }
  var /= (n - 1.0);
  DivergenceEstimate e;
  e.kind = DivergenceKind::tv;
  e.method = EstimateMethod::monte_carlo;
  e.value = 0.5 * ratio;
  e.err_estimate = 0.5 * std::sqrt(var / n) / z;
  return e;
}

// ---------------------------------------------------------------------------

RandomSkewingFunction::RandomSkewingFunction(const Vector& center, const Matrix& covariance,
                                             Rng& rng)
    : center_(center) {
  const int d = static_cast<int>(center.size());
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("covariance not SPD");
  factor_ = llt.matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  a_.resize(d);
  u_.resize(d);
  for (int i = 0; i < d; ++i) {
    a_(i) = 0.8 * normal(rng);
    u_(i) = normal(rng);
  }
  u_ /= u_.norm();
  b_ = 0.02 * normal(rng);
}

double RandomSkewingFunction::argument(const Vector& theta) const {
  const Vector z = factor_.triangularView<Eigen::Lower>().solve(theta - center_);
  const double t = u_.dot(z);
  return a_.dot(z) + b_ * t * t * t;
}

double RandomSkewingFunction::operator()(const Vector& theta) const {
  return logistic(argument(theta));
}

double RandomSkewingFunction::log_value(const Vector& theta) const {
  return log_logistic(argument(theta));
}

Vector RandomSkewingFunction::log_values(const Matrix& points) const {
  if (points.rows() != center_.size()) throw std::invalid_argument("dimension mismatch");
  const Matrix z = factor_.triangularView<Eigen::Lower>().solve(
      points - center_.replicate(1, points.cols()));
  const Eigen::ArrayXd t = (u_.transpose() * z).transpose().array();
  const Eigen::ArrayXd arg = (a_.transpose() * z).transpose().array() + b_ * t * t * t;
  return arg.unaryExpr([](double x) { return log_logistic(x); }).matrix();
}

}  // namespace skewfit
