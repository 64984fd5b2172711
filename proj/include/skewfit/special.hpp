#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace skewfit {

inline constexpr double kLog2Pi = 1.8378770664093454836;
inline constexpr double kLog2 = 0.69314718055994530942;

/// 1 / (1 + exp(-x)), saturating to exactly 0 or 1 in the far tails.
double logistic(double x);

/// log(1 / (1 + exp(-x))) without overflow.
double log_logistic(double x);

/// log(exp(a) + exp(b)); -inf if both are -inf.
double log_add_exp(double a, double b);

double normal_cdf(double x);

/// log Phi(x). Uses erfc down to x = -30 and the asymptotic Mills-ratio
/// series below that, so the result stays finite for any finite x.
double log_normal_cdf(double x);

/// phi(x) / Phi(x).
double inverse_mills(double x);

double normal_quantile(double p);

/// Gauss-Hermite rule for the weight exp(-x^2), via Golub-Welsch.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussHermiteRule& gauss_hermite(int n);

/// Linear-interpolation (type 7) sample quantile of unsorted data.
double quantile_type7(std::span<const double> data, double p);
/// Same, but `sorted` must already be ascending.
double quantile_type7_sorted(std::span<const double> sorted, double p);

/// splitmix64 finalizer; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t x);
/// Stable per-task seed: hash of (seed, task name).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view task);

}  // namespace skewfit
