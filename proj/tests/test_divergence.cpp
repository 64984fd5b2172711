#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "skewfit/divergence.hpp"
#include "skewfit/skew.hpp"

using namespace skewfit;

namespace {

LogDensityFn normal_logpdf(double mu, double sd) {
  return [mu, sd](const Vector& t) {
    const double z = (t(0) - mu) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2 * std::numbers::pi);
  };
}

GridSpec line(double lo, double hi, int n = 4096) {
  return GridSpec{Vector::Constant(1, lo), Vector::Constant(1, hi), n};
}

}  // namespace

TEST_SUITE("divergence") {

TEST_CASE("identical densities have zero divergence") {
  const auto p = normal_logpdf(0, 1);
  const GridSpec g = line(-12, 13);
  CHECK(tv_grid(p, p, g).value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(kl_grid(p, p, KlDirection::forward, g).value == doctest::Approx(0.0).epsilon(1e-12));
  for (double a : {-1.0, 0.5, 2.0}) CHECK(std::abs(alpha_div_grid(p, p, a, g).value) < 1e-10);
}

TEST_CASE("equal-variance Gaussians against closed forms") {
  const auto p = normal_logpdf(0, 1), q = normal_logpdf(1, 1);
  const GridSpec g = line(-12, 13);
  // TV = 2 Phi(1/2) - 1
  const double tv = std::erf(0.5 / std::sqrt(2.0));
  CHECK(tv_grid(p, q, g).value == doctest::Approx(tv).epsilon(1e-6));
  CHECK(tv == doctest::Approx(0.382924922548026).epsilon(1e-12));
  // int sqrt(pq) = exp(-1/8)
  CHECK(alpha_div_grid(p, q, 0.5, g).value == doctest::Approx(4 * (1 - std::exp(-0.125))).epsilon(1e-6));
  // alpha = 2: (1 - exp(1)) / (2 * -1)... int p^2/q = exp(dmu^2)
  CHECK(alpha_div_grid(p, q, 2.0, g).value == doctest::Approx((std::exp(1.0) - 1) / 2).epsilon(1e-6));
  CHECK(kl_grid(p, q, KlDirection::forward, g).value == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(kl_grid(p, q, KlDirection::reverse, g).value == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("alpha near 0 and 1 approaches the KL limits") {
  const auto p = normal_logpdf(0, 1), q = normal_logpdf(0.5, 1.4);
  const GridSpec g = line(-14, 15);
  const double fwd = kl_grid(p, q, KlDirection::forward, g).value;
  const double rev = kl_grid(p, q, KlDirection::reverse, g).value;
  CHECK(std::abs(alpha_div_grid(p, q, 0.999, g).value - fwd) < 1e-2);
  CHECK(std::abs(alpha_div_grid(p, q, 0.001, g).value - rev) < 1e-2);
  CHECK_THROWS_AS(alpha_div_grid(p, q, 1.0, g), std::invalid_argument);
  CHECK_THROWS_AS(alpha_div_grid(p, q, 0.0, g), std::invalid_argument);
}

TEST_CASE("mass outside the grid is an error naming the deficit") {
  const auto p = normal_logpdf(0, 1);
  try {
    tv_grid(p, p, line(-2, 2));
    FAIL("expected DomainTooSmallError");
  } catch (const DomainTooSmallError& e) {
    CHECK(e.deficit() == doctest::Approx(1 - std::erf(2 / std::sqrt(2.0))).epsilon(1e-3));
  }
}

TEST_CASE("KL flags a support mismatch") {
  const auto p = normal_logpdf(0, 1);
  // 2 t^2 phi(t) on t > 0: continuous, so the grid still normalizes it
  const LogDensityFn one_sided = [](const Vector& t) {
    if (t(0) <= 0) return -std::numeric_limits<double>::infinity();
    return std::log(2 * t(0) * t(0)) - 0.5 * t(0) * t(0) - 0.5 * std::log(2 * std::numbers::pi);
  };
  CHECK_THROWS_AS(kl_grid(p, one_sided, KlDirection::forward, line(-12, 12)), SupportMismatchError);
  CHECK(std::isfinite(kl_grid(one_sided, p, KlDirection::forward, line(-12, 12)).value));
}

TEST_CASE("doubling the resolution moves TV by less than the error estimate") {
  const auto p = normal_logpdf(0, 1), q = normal_logpdf(1, 1);
  const auto e = tv_grid(p, q, line(-12, 12.3, 512));
  const auto fine = tv_grid(p, q, line(-12, 12.3, 1023));
  CHECK(e.err_estimate > 0);
  CHECK(std::abs(fine.value - e.value) < e.err_estimate);
  CHECK(e.err_estimate < 1e-3);
  CHECK(e.method == EstimateMethod::quadrature);
  const auto j = e.to_json();
  CHECK(j.at("kind") == "tv");
  CHECK(j.contains("grid"));
}

TEST_CASE("grid spec validation") {
  CHECK_THROWS(line(1, 0).validate());
  CHECK_THROWS((GridSpec{Vector::Zero(1), Vector::Ones(1), 10}).validate());
  CHECK_THROWS((GridSpec{Vector::Zero(3), Vector::Ones(3), 64}).validate());
}

TEST_CASE("symmetrized density is even and recovers the skew-symmetric identity") {
  const auto p = normal_logpdf(1, 1);
  const auto s = symmetrize_logpdf(p, Vector::Zero(1));
  for (double t : {0.1, 0.7, 2.5, 6.0}) {
    CHECK(s(Vector::Constant(1, t)) == doctest::Approx(s(Vector::Constant(1, -t))).epsilon(1e-12));
    const double direct = std::log(0.5 * (std::exp(p(Vector::Constant(1, t))) + std::exp(p(Vector::Constant(1, -t)))));
    CHECK(s(Vector::Constant(1, t)) == doctest::Approx(direct).epsilon(1e-12));
  }
  // pi = 2 pi_bar w on a 1D Poisson posterior
  const GlmModel m = testutil::random_glm(Family::poisson_log, 6, Vector::Constant(1, 0.4), 3);
  const ModelSpec spec = m.spec();
  const Vector center = fit_laplace(spec, Vector::Zero(1)).center();
  const LogDensityFn lp = [&](const Vector& t) { return log_unnorm_posterior(spec, t); };
  const auto lbar = symmetrize_logpdf(lp, center);
  const SkewnessFactor f(spec, center);
  for (double h = -1.5; h <= 1.5; h += 0.25) {
    const Vector t = center + Vector::Constant(1, h);
    const double lhs = std::exp(lp(t));
    const double rhs = 2 * std::exp(lbar(t)) * skew_factor(f, t);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, lhs));
  }
}

TEST_CASE("Monte Carlo TV agrees with quadrature") {
  Rng rng(3);
  const auto p = normal_logpdf(0, 1);
  std::normal_distribution<double> z(0, 1);
  auto sampler = [&](Rng& r) { return Vector::Constant(1, z(r)); };
  const auto same = tv_mc(p, sampler, p, 20000, rng);
  CHECK(same.value <= 3 * same.err_estimate + 1e-12);

  const GlmModel m = testutil::random_glm(Family::poisson_log, 5, Vector::Constant(1, 0.5), 2);
  const ModelSpec spec = m.spec();
  const auto la = fit_laplace(spec, Vector::Zero(1));
  const LogDensityFn lp = [&](const Vector& t) { return log_unnorm_posterior(spec, t); };
  const LogDensityFn lq = [&](const Vector& t) { return la.log_pdf(t); };
  const GridSpec g = default_grid(la.center(), la.covariance());
  QuadratureGrid qg(g);
  const double grid_tv = tv_grid(normalize_on_grid(lp, qg), lq, g).value;
  const auto mc = tv_mc(lp, [&](Rng& r) { return la.draw(r); }, lq, 100000, rng);
  CHECK(std::abs(mc.value - grid_tv) <= 3 * mc.err_estimate);
  CHECK(mc.value <= 1.0);
}

TEST_CASE("random skewing functions are valid") {
  Matrix cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.5;
  Vector c(2);
  c << 0.5, -0.2;
  Rng rng(8);
  for (int k = 0; k < 20; ++k) {
    const RandomSkewingFunction w(c, cov, rng);
    Matrix pts(2, 5);
    pts.setRandom();
    const Vector lv = w.log_values(pts);
    for (int i = 0; i < 5; ++i) {
      const Vector t = pts.col(i);
      CHECK(w(t) + w(2 * c - t) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(lv(i) == doctest::Approx(w.log_value(t)).epsilon(1e-14));
    }
  }
}

}
