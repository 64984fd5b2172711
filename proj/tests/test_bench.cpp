#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "skewfit/bench.hpp"

using namespace skewfit;

namespace {

FunctionalSummary theta_only(std::vector<double> means) {
  FunctionalSummary s;
  const int d = static_cast<int>(means.size());
  const Vector m = Eigen::Map<Vector>(means.data(), d);
  s.theta = {Vector::Zero(d), Vector::Zero(d), Vector::Zero(d), m};
  s.n_samples = 1000;
  return s;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("degenerate draws summarize to the constant") {
  const Matrix s = Matrix::Constant(1000, 2, 1.5);
  const auto f = summarize(s);
  for (const Vector* v : {&f.theta.q1, &f.theta.median, &f.theta.q3, &f.theta.mean}) {
    CHECK((v->array() == 1.5).all());
  }
  CHECK_FALSE(f.mu.has_value());
  CHECK(f.warnings.empty());
}

TEST_CASE("normal quartiles") {
  Rng rng(1);
  std::normal_distribution<double> z(0, 1);
  Matrix s(1000000, 1);
  for (int i = 0; i < s.rows(); ++i) s(i, 0) = z(rng);
  const auto f = summarize(s);
  CHECK(std::abs(f.theta.q1(0) + 0.6744897501960817) < 0.005);
  CHECK(std::abs(f.theta.q3(0) - 0.6744897501960817) < 0.005);
  CHECK(std::abs(f.theta.median(0)) < 0.005);
}

TEST_CASE("mu summaries with a fixed theta are exact") {
  const GlmModel m = testutil::random_glm(Family::bernoulli_logit, 7, Vector::Constant(2, 0.3), 4);
  Vector theta(2);
  theta << 0.4, -0.9;
  Matrix s(1000, 2);
  s.rowwise() = theta.transpose();
  const auto f = summarize(s, &m);
  REQUIRE(f.mu.has_value());
  const Vector eta = m.design() * theta;
  for (int i = 0; i < 7; ++i) {
    const double mu = 1 / (1 + std::exp(-eta(i)));
    CHECK(f.mu->q1(i) == doctest::Approx(mu).epsilon(1e-15));
    CHECK(f.mu->mean(i) == doctest::Approx(mu).epsilon(1e-15));
  }
}

TEST_CASE("few draws attach a precision warning") {
  const auto f = summarize(Matrix::Zero(10, 1));
  CHECK_FALSE(f.warnings.empty());
}

TEST_CASE("error table arithmetic") {
  const auto table = error_table({{"approx", theta_only({0.1, -0.3})}}, theta_only({0.0, 0.0}));
  CHECK(table.row("approx").cells[3] == doctest::Approx(0.2));
  CHECK(table.row("approx").cells[0] == 0.0);
  CHECK(std::isnan(table.row("approx").cells[7]));
  CHECK_THROWS_AS(error_table({{"x", theta_only({1, 2, 3})}}, theta_only({0, 0})), std::invalid_argument);
}

TEST_CASE("approximation equal to the baseline gives zeros") {
  const GlmModel m = testutil::random_glm(Family::poisson_log, 5, Vector::Constant(1, 0.3), 4);
  Rng rng(2);
  std::normal_distribution<double> z(0.3, 0.1);
  Matrix s(2000, 1);
  for (int i = 0; i < 2000; ++i) s(i, 0) = z(rng);
  const auto f = summarize(s, &m);
  const auto t = error_table({{"self", f}}, f);
  for (double c : t.row("self").cells) CHECK(c == 0.0);
}

TEST_CASE("best-in-pair marking and columns won") {
  ErrorTable t;
  t.rows.push_back({"a", {1, 2, 3, 4, 5, 6, 7, 8}, {}});
  t.rows.push_back({"b", {2, 1, 3, 5, 4, 7, 6, 9}, {}});
  t.mark_best({{"a", "b"}});
  CHECK(t.row("a").best[0]);
  CHECK_FALSE(t.row("b").best[0]);
  CHECK(t.row("b").best[1]);
  CHECK(t.row("a").best[2]);
  CHECK(t.row("b").best[2]);
  CHECK(t.columns_won("a", "b") == 4);
  CHECK(t.columns_won("b", "a") == 3);
  CHECK_THROWS(t.row("zzz"));
}

TEST_CASE("CSV round trip") {
  ErrorTable t;
  t.rows.push_back({"la", {0.0112, 1.0 / 3.0, 2e-17, 0.1, 1e3, 0.25, 0.5, 0.75}, {}});
  t.rows.push_back({"skew-la", {0.003, 0.0017, 0.0027, 0.0024, 0.0382, 0.0249, 0.0654, 0.0286}, {}});
  const auto back = ErrorTable::from_csv(t.to_csv());
  REQUIRE(back.rows.size() == 2);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(back.rows[r].name == t.rows[r].name);
    for (int c = 0; c < 8; ++c) CHECK(std::abs(back.rows[r].cells[c] - t.rows[r].cells[c]) <= 1e-12);
  }
  const std::string header = t.to_csv().substr(0, t.to_csv().find('\n'));
  CHECK(header == "approximation,q1.theta,median.theta,q3.theta,mean.theta,q1.mu,median.mu,q3.mu,mean.mu");
}

TEST_CASE("least squares slope") {
  const auto f = fit_slope({0, 1, 2, 3}, {1, -1, -3, -5});
  CHECK(f.slope == doctest::Approx(-2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.stderr_slope == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("conjugate Gaussian family has machine-zero TV and no slope") {
  RateOptions opts;
  opts.sample_sizes = {25, 100, 400};
  opts.replicates = 3;
  const auto curves = rate_experiment(gaussian_mean_family(), opts);
  REQUIRE(curves.size() == 3);
  for (const auto& c : curves) {
    for (double tv : c.tv_values) CHECK(tv < 1e-10);
    CHECK_FALSE(c.slope_defined);
    CHECK_FALSE(c.slope_note.empty());
  }
}

TEST_CASE("a single sample size leaves the slope undefined") {
  RateOptions opts;
  opts.sample_sizes = {200};
  opts.replicates = 4;
  const auto curves = rate_experiment(exponential_rate_family(), opts);
  for (const auto& c : curves) {
    CHECK_FALSE(c.slope_defined);
    CHECK(c.tv_values.size() == 1);
    CHECK(c.tv_values[0] > 0);
    CHECK(c.to_json().at("fitted_slope").is_null());
  }
}

TEST_CASE("skewing reduces TV at every sample size") {
  RateOptions opts;
  opts.sample_sizes = {25, 100, 400};
  opts.replicates = 4;
  const auto curves = rate_experiment(exponential_rate_family(), opts);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(curves[1].tv_values[i] < curves[0].tv_values[i]);
    CHECK(curves[2].tv_values[i] < curves[1].tv_values[i]);
  }
  CHECK_THROWS_AS(rate_experiment(exponential_rate_family(), RateOptions{{100, 50}}), ConfigError);
}

TEST_CASE("report with one table and no curves") {
  Report r;
  r.command = "compare";
  r.seed = 3;
  ErrorTable t;
  t.rows.push_back({"la", {}, {}});
  r.tables.emplace_back("errors", t);
  const auto j = report_json(r, "2020-01-01T00:00:00Z");
  CHECK(j.at("schema_version") == 1);
  CHECK(j.at("curves").is_array());
  CHECK(j.at("curves").empty());
  CHECK(j.at("tables")[0].at("name") == "errors");
  CHECK(j.at("timestamp") == "2020-01-01T00:00:00Z");

  const auto dir = std::filesystem::temp_directory_path() / "skewfit_test_report";
  std::filesystem::remove_all(dir);
  const std::string path = emit_report(r, dir.string());
  CHECK(std::filesystem::exists(dir / "errors.csv"));
  std::ifstream in(path);
  CHECK(nlohmann::json::parse(in).at("command") == "compare");
  CHECK_THROWS(emit_report(r, "/proc/skewfit-unwritable"));
  CHECK_THROWS_AS(emit_report(Report{}, dir.string()), std::invalid_argument);
}

}
