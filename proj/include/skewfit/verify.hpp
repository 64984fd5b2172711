#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "skewfit/divergence.hpp"
#include "skewfit/model.hpp"
#include "skewfit/skew.hpp"
#include "skewfit/symmetric.hpp"

namespace skewfit {

/// One (model, symmetric base) pair of the invariant battery.
struct BatteryCase {
  std::string name;
  ModelSpec model;
  std::optional<GlmModel> glm;
  SymmetricApproximation base;
  bool conjugate = false;

  SkewSymmetricApproximation skewed() const;
};

struct BatteryOptions {
  std::uint64_t seed = 1;
  bool conjugate_only = false;
};

/// Poisson, logistic, probit and conjugate Gaussian GLMs in d = 1, 2 with
/// their laplace / gvb / gep / snp bases.
std::vector<BatteryCase> build_battery(const BatteryOptions& opts = {});

/// Posterior, symmetrized posterior, base and skewed density tabulated on a
/// grid symmetric about the base's center. The posterior is normalized on
/// the grid; the other three are used as they come.
struct GridTables {
  QuadratureGrid grid;
  std::vector<double> log_post;
  std::vector<double> log_sym_post;
  std::vector<double> log_base;
  std::vector<double> log_skew;
  std::vector<double> weight;
};
GridTables tabulate(const BatteryCase& c, std::optional<GridSpec> spec = std::nullopt);

/// The divergences every suite runs: tv, alpha in {-1, 0.5, 2}, KL both ways.
struct DivergenceSpec {
  std::string label;
  DivergenceKind kind;
  double alpha = 0.0;
};
const std::vector<DivergenceSpec>& divergence_battery();
DivergenceEstimate evaluate_divergence(const DivergenceSpec& spec, const QuadratureGrid& grid,
                                       std::span<const double> lp, std::span<const double> lq);

struct CheckResult {
  std::string suite;
  std::string case_name;
  std::string check;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;

  nlohmann::json to_json() const;
};

struct VerifyOptions {
  BatteryOptions battery;
  int random_skewing_functions = 50;
  int ks_draws = 100000;
  /// Mutation test: replaces w by min(w + 0.01, 1) in the skewed density.
  bool corrupt_weight = false;
  /// Suites to run; empty means all of them.
  std::vector<std::string> suites;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  std::vector<std::string> case_names;

  bool passed() const;
  bool suite_passed(const std::string& suite) const;
  /// Number of checks recorded for a suite.
  int suite_size(const std::string& suite) const;
  nlohmann::json to_json() const;
};

/// Suite names: symmetry, normalization, factor, equality, inequality,
/// optimality, sampler, degeneracy.
const std::vector<std::string>& verify_suite_names();

VerifyReport run_verify(const VerifyOptions& opts = {});

/// Two-sided Kolmogorov-Smirnov distance of sorted draws against a CDF
/// tabulated at increasing abscissae, and its asymptotic p-value.
struct KsResult {
  double statistic;
  double p_value;
};
KsResult ks_test(std::vector<double> draws, const std::vector<double>& x,
                 const std::vector<double>& cdf);
double kolmogorov_pvalue(double statistic, std::size_t n);

}  // namespace skewfit
