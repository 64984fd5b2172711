#include "skewfit/special.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string_view>

namespace skewfit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
}  // namespace

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_logistic(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double log_add_exp(double a, double b) {
  if (a == -kInf && b == -kInf) return -kInf;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {
// log of the Mills-ratio series 1 - 1/x^2 + 3/x^4 - ... for x << 0.
double mills_series_log(double x) {
  const double x2 = x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -(2.0 * k - 1.0) / x2;
    sum += term;
  }
  return std::log(sum);
}
}  // namespace

double log_normal_cdf(double x) {
  if (x > 5.0) return std::log1p(-0.5 * std::erfc(x / std::sqrt(2.0)));
  if (x >= -30.0) return std::log(normal_cdf(x));
  return -0.5 * x * x - std::log(-x) - kLogSqrt2Pi + mills_series_log(x);
}

double inverse_mills(double x) {
  if (x >= -30.0) {
    return std::exp(-0.5 * x * x - kLogSqrt2Pi - log_normal_cdf(x));
  }
  return std::exp(std::log(-x) - mills_series_log(x));
}

// Acklam's rational approximation refined by one Halley step.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw std::invalid_argument("normal_quantile: p outside [0,1]");
  }
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1 + 0.5 * x * u);
}

const GaussHermiteRule& gauss_hermite(int n) {
  static std::mutex mu;
  static std::map<int, GaussHermiteRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  // Jacobi matrix of the physicists' Hermite recurrence.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(i / 2.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  // Eigenvector components only fix the weights to absolute precision, which
  // loses the far-tail weights entirely. Polish each node by Newton on the
  // orthonormal Hermite polynomial and take the Christoffel number instead.
  const double p0 = std::pow(M_PI, -0.25);
  auto orthonormal = [&](double x, double& pn, double& pn1, double& sum_sq) {
    double prev = 0.0, cur = p0;
    sum_sq = 0.0;
    for (int j = 0; j < n; ++j) {
      sum_sq += cur * cur;
      const double next = std::sqrt(2.0 / (j + 1)) * x * cur - std::sqrt(j / (j + 1.0)) * prev;
      prev = cur;
      cur = next;
    }
    pn = cur;
    pn1 = prev;
  };
  for (int i = 0; i < n; ++i) {
    double x = eig.eigenvalues()(i);
    double pn, pn1, sum_sq;
    for (int it = 0; it < 3; ++it) {
      orthonormal(x, pn, pn1, sum_sq);
      x -= pn / (std::sqrt(2.0 * n) * pn1);
    }
    orthonormal(x, pn, pn1, sum_sq);
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / sum_sq;
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

double quantile_type7_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile_type7(std::span<const double> data, double p) {
  std::vector<double> copy(data.begin(), data.end());
  std::sort(copy.begin(), copy.end());
  return quantile_type7_sorted(copy, p);
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view task) {
  // FNV-1a over the task name, then mixed with the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : task) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return mix_seed(seed ^ mix_seed(h));
}

}  // namespace skewfit
