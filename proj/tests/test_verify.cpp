#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "skewfit/special.hpp"
#include "skewfit/verify.hpp"

using namespace skewfit;

TEST_SUITE("verify") {

TEST_CASE("battery covers every family and base kind") {
  const auto cases = build_battery();
  CHECK(cases.size() >= 6);
  std::set<ApproxKind> kinds;
  int conjugate = 0;
  for (const auto& c : cases) {
    kinds.insert(c.base.kind());
    conjugate += c.conjugate;
    CHECK(c.model.dim <= 2);
  }
  CHECK(kinds.size() == 4);
  CHECK(conjugate >= 1);
  for (const auto& c : build_battery({1, true})) CHECK(c.name.rfind("gaussian", 0) == 0);
}

TEST_CASE("conjugate-only battery passes with tight inequalities") {
  VerifyOptions opts;
  opts.battery.conjugate_only = true;
  const auto rep = run_verify(opts);
  CHECK(rep.passed());
  CHECK(rep.suite_size("degeneracy") > 0);
  for (const auto& c : rep.checks) {
    if (c.suite == "equality" || c.suite == "inequality") CHECK(std::abs(c.value) <= 1e-8);
  }
}

TEST_CASE("a corrupted skewing factor breaks the equality") {
  VerifyOptions opts;
  opts.corrupt_weight = true;
  opts.suites = {"equality"};
  const auto rep = run_verify(opts);
  CHECK(rep.suite_size("equality") > 0);
  CHECK_FALSE(rep.suite_passed("equality"));
  CHECK_FALSE(rep.passed());
}

TEST_CASE("unknown suite names are rejected") {
  VerifyOptions opts;
  opts.suites = {"nope"};
  CHECK_THROWS_AS(run_verify(opts), ConfigError);
}

TEST_CASE("tabulated posterior factorizes as 2 pi_bar w") {
  const auto cases = build_battery();
  const auto& c = cases.front();
  const GridTables t = tabulate(c);
  for (std::size_t k = 0; k < t.log_post.size(); k += 97) {
    const double lhs = std::exp(t.log_post[k]);
    const double rhs = 2 * std::exp(t.log_sym_post[k]) * t.weight[k];
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, lhs));
  }
}

TEST_CASE("KS test and Kolmogorov p-values") {
  CHECK(kolmogorov_pvalue(0.0, 100) == doctest::Approx(1.0));
  CHECK(kolmogorov_pvalue(0.5, 1000) < 1e-10);
  // asymptotic: P(sqrt(n) D > 1.3581) = 0.05
  CHECK(kolmogorov_pvalue(1.3581 / std::sqrt(1e6), 1000000) == doctest::Approx(0.05).epsilon(0.01));
  Rng rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> draws(20000);
  for (auto& d : draws) d = u(rng);
  std::vector<double> x(1001), cdf(1001);
  for (int i = 0; i <= 1000; ++i) x[i] = cdf[i] = i / 1000.0;
  CHECK(ks_test(draws, x, cdf).p_value > 0.01);
  for (auto& d : draws) d = d * d;
  CHECK(ks_test(draws, x, cdf).p_value < 1e-6);
}

TEST_CASE("check results serialize") {
  CheckResult c{"equality", "poisson1d-laplace", "tv", 1e-9, 1e-6, true, ""};
  const auto j = c.to_json();
  CHECK(j.at("suite") == "equality");
  CHECK(j.at("passed") == true);
}

}
