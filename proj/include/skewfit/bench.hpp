#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "skewfit/divergence.hpp"
#include "skewfit/model.hpp"
#include "skewfit/symmetric.hpp"

namespace skewfit {

/// Quartiles (type 7) and mean, one entry per coordinate.
struct QuartileSummary {
  Vector q1, median, q3, mean;
};

struct FunctionalSummary {
  QuartileSummary theta;
  std::optional<QuartileSummary> mu;  // per observation, when a GLM is given
  int n_samples = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Summaries of an n x d draw matrix. With a model, mu_i(theta) is
/// evaluated per draw and then summarized.
FunctionalSummary summarize(const Matrix& samples, const GlmModel* model = nullptr);

inline constexpr std::array<const char*, 8> kErrorColumns = {
    "q1.theta", "median.theta", "q3.theta", "mean.theta",
    "q1.mu",    "median.mu",    "q3.mu",    "mean.mu"};

struct ErrorRow {
  std::string name;
  std::array<double, 8> cells{};
  std::array<bool, 8> best{};
};

struct ErrorTable {
  std::vector<ErrorRow> rows;

  const ErrorRow& row(const std::string& name) const;
  /// Flag the smaller cell of each (first, second) row pair; ties go to both.
  void mark_best(const std::vector<std::pair<std::string, std::string>>& pairs);
  /// Number of columns where `a` is strictly below `b`.
  int columns_won(const std::string& a, const std::string& b) const;

  nlohmann::json to_json() const;
  /// Header "approximation,q1.theta,...,mean.mu"; cells at 17 significant digits.
  std::string to_csv() const;
  static ErrorTable from_csv(const std::string& text);
};

/// Cell = mean over coordinates (theta) or observations (mu) of
/// |approx - baseline|. mu columns are NaN when either side lacks them.
ErrorTable error_table(const std::vector<std::pair<std::string, FunctionalSummary>>& summaries,
                       const FunctionalSummary& baseline);

/// A one-parameter data-generating family for the rate experiment.
struct RateFamily {
  std::string name;
  /// Posterior for a fresh dataset of size n; needs analytic derivatives up
  /// to order 4.
  std::function<ModelSpec(int n, Rng& rng)> simulate;
};

/// y_i ~ Exp(rate e^theta) with theta_0 = 0 and prior N(0, 100).
RateFamily exponential_rate_family();
/// y_i ~ N(theta, 1) with prior N(0, 100): symmetric posterior.
RateFamily gaussian_mean_family();

struct RateCurve {
  std::string variant;  // "f1" (Laplace), "q1" (skew-Laplace), "q2" (skew-SNP)
  std::vector<int> sample_sizes;
  std::vector<double> tv_values;  // median over replicates
  std::vector<std::vector<double>> replicate_tv;
  double fitted_slope = 0.0;
  double slope_stderr = 0.0;
  bool slope_defined = false;
  std::string slope_note;

  nlohmann::json to_json() const;
};

struct RateOptions {
  std::vector<int> sample_sizes = {25, 50, 100, 200, 400, 800, 1600, 3200, 6400};
  int replicates = 20;
  std::uint64_t seed = 1;
  double grid_width = 12.0;
  int grid_points = 4096;
};

/// Median TV to the posterior, per n, for f1, q1 and q2, with least-squares
/// slopes of log TV on log n.
std::vector<RateCurve> rate_experiment(const RateFamily& family, const RateOptions& opts);

/// Ordinary least squares slope and its standard error.
struct SlopeFit {
  double slope;
  double intercept;
  double stderr_slope;
};
SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Everything a report carries. Tables and curves keep insertion order.
struct Report {
  std::string command;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, ErrorTable>> tables;
  std::vector<RateCurve> curves;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();
};

/// git-describe style version baked in at configure time.
std::string version_string();

/// Report document with schema_version 1; `timestamp` is the only
/// run-dependent field.
nlohmann::json report_json(const Report& report, const std::string& timestamp);

/// Writes report.json plus one CSV per table into `dir` (created if needed).
/// Returns the report path.
std::string emit_report(const Report& report, const std::string& dir);

/// UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace skewfit
