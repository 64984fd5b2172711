#include "skewfit/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "skewfit/parallel.hpp"
#include "skewfit/special.hpp"

namespace skewfit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr double kEqualityTol = 1e-6;
constexpr double kInequalitySlack = 1e-8;
constexpr double kMassTol = 1e-6;
constexpr double kFactorTol = 1e-12;
constexpr double kKsLevel = 0.01;
constexpr double kFlipSigmas = 4.0;

std::vector<std::string> names_of(int d) {
  std::vector<std::string> out;
  for (int j = 0; j < d; ++j) out.push_back("theta" + std::to_string(j + 1));
  return out;
}

GlmModel simulate_glm(Family family, int n, const Vector& truth, bool intercept, Rng& rng) {
  const int d = static_cast<int>(truth.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix x(n, d);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = (intercept && j == 0) ? 1.0 : normal(rng);
    const double eta = x.row(i).dot(truth);
    switch (family) {
      case Family::bernoulli_logit:
      case Family::bernoulli_probit:
        y(i) = unif(rng) < family_mean(family, eta) ? 1.0 : 0.0;
        break;
      case Family::gaussian_identity:
        y(i) = eta + normal(rng);
        break;
      case Family::poisson_log: {
        std::poisson_distribution<int> pois(std::exp(eta));
        y(i) = pois(rng);
        break;
      }
    }
  }
  return GlmModel(x, y, family, Vector::Zero(d), Vector::Constant(d, 4.0), names_of(d));
}

void add_glm_cases(std::vector<BatteryCase>& out, const std::string& label, const GlmModel& glm,
                   const std::vector<ApproxKind>& kinds, bool conjugate, std::uint64_t seed) {
  const ModelSpec spec = glm.spec();
  const SymmetricApproximation laplace = fit_laplace(spec, Vector::Zero(glm.dim()));
  for (ApproxKind k : kinds) {
    // Only the Laplace base is exact on a conjugate model; iterative fits
    // stop at their tolerance.
    BatteryCase c{label + "-" + to_string(k), spec, glm, laplace,
                  conjugate && k == ApproxKind::laplace};
    switch (k) {
      case ApproxKind::laplace:
        break;
      case ApproxKind::gvb: {
        GvbOptions opts;
        opts.seed = derive_seed(seed, "battery-gvb-" + label);
        c.base = fit_gvb(spec, *laplace.gaussian(), opts);
        break;
      }
      case ApproxKind::gep:
        c.base = fit_gep(glm);
        break;
      case ApproxKind::snp:
        c.base = build_snp(spec, laplace);
        break;
    }
    out.push_back(std::move(c));
  }
}


Matrix grid_points(const QuadratureGrid& grid) {
  Matrix pts(grid.spec().dim(), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) pts.col(static_cast<Eigen::Index>(k)) = grid.point(k);
  return pts;
}

// Unnormalized log posterior at each column; GLMs go through X * theta in
// blocks of columns.
std::vector<double> log_posterior_columns(const BatteryCase& c, const Matrix& pts) {
  const Eigen::Index n = pts.cols();
  std::vector<double> out(static_cast<std::size_t>(n));
  if (!c.glm) {
    for (Eigen::Index k = 0; k < n; ++k) out[k] = log_unnorm_posterior(c.model, pts.col(k));
    return out;
  }
  const GlmModel& g = *c.glm;
  constexpr Eigen::Index kBlock = 2048;
  for (Eigen::Index k0 = 0; k0 < n; k0 += kBlock) {
    const Eigen::Index m = std::min(kBlock, n - k0);
    const Matrix eta = g.design() * pts.middleCols(k0, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      double s = g.log_prior(pts.col(k0 + k));
      for (int i = 0; i < g.n_obs(); ++i) s += g.obs_log_density(i, eta(i, k));
      out[k0 + k] = std::isnan(s) ? -kInf : s;
    }
  }
  return out;
}

CheckResult make_check(std::string suite, std::string case_name, std::string check, double value,
                       double tolerance, bool passed, std::string detail = {}) {
  return {std::move(suite), std::move(case_name), std::move(check), value, tolerance, passed,
          std::move(detail)};
}

bool wanted(const VerifyOptions& opts, const std::string& suite) {
  return opts.suites.empty() ||
         std::find(opts.suites.begin(), opts.suites.end(), suite) != opts.suites.end();
}

// Divergence or the error message that prevented it.
struct Outcome {
  double value = 0.0;
  std::string error;
  bool ok() const { return error.empty(); }
};

Outcome try_divergence(const DivergenceSpec& spec, const QuadratureGrid& grid,
                       std::span<const double> lp, std::span<const double> lq) {
  try {
    return {evaluate_divergence(spec, grid, lp, lq).value, {}};
  } catch (const std::exception& e) {
    return {kInf, e.what()};
  }
}

void run_case(const BatteryCase& c, const VerifyOptions& opts, std::vector<CheckResult>& out) {
  GridTables t = tabulate(c);
  const QuadratureGrid& grid = t.grid;
  const std::size_t npts = grid.size();

  if (opts.corrupt_weight) {
    std::vector<double> lq(npts);
    for (std::size_t k = 0; k < npts; ++k) {
      lq[k] = kLog2 + t.log_base[k] + std::log(std::min(1.0, t.weight[k] + 0.01));
    }
    const double log_mass = grid.log_integral(lq);
    for (std::size_t k = 0; k < npts; ++k) t.log_skew[k] = lq[k] - log_mass;
  }

  if (wanted(opts, "symmetry")) {
    double worst = 0.0;
    for (std::size_t k = 0; k < npts; ++k) {
      const Vector th = grid.point(k);
      const double a = c.base.log_pdf(th);
      if (a < -700.0) continue;
      worst = std::max(worst, std::abs(a - c.base.log_pdf(mirror(th, c.base.center()))));
    }
    out.push_back(make_check("symmetry", c.name, "base log-density even about center", worst,
                             1e-9, worst <= 1e-9));
  }

  if (wanted(opts, "normalization")) {
    const double mf = std::exp(grid.log_integral(t.log_base));
    const double mq = std::exp(grid.log_integral(t.log_skew));
    out.push_back(make_check("normalization", c.name, "base mass on grid", std::abs(1.0 - mf),
                             kMassTol, std::abs(1.0 - mf) < kMassTol));
    out.push_back(make_check("normalization", c.name, "skewed mass on grid", std::abs(1.0 - mq),
                             kMassTol, std::abs(1.0 - mq) < kMassTol));
  }

  if (wanted(opts, "factor")) {
    const SkewSymmetricApproximation q = c.skewed();
    const SkewnessFactor naive(c.model, q.center());
    double pair_err = 0.0, range_err = 0.0, identity_err = 0.0, fast_err = 0.0, tab_err = 0.0;
    // The library's weight (fast path for GLMs) on every fifth node, against
    // the tabulated w and its own mirror value.
    for (std::size_t k = 0; k < npts; ++k) {
      const double w = t.weight[k];
      if (w < 0.0 || w > 1.0) range_err = std::max(range_err, std::abs(w - 0.5) - 0.5);
      const double p = std::exp(t.log_post[k]);
      const double rebuilt = 2.0 * std::exp(t.log_sym_post[k]) * w;
      identity_err = std::max(identity_err, std::abs(p - rebuilt) / std::max(1.0, p));
      if (k % 5 != 0) continue;
      const Vector th = grid.point(k);
      const double wq = q.weight(th);
      pair_err = std::max(pair_err, std::abs(wq + q.weight(mirror(th, q.center())) - 1.0));
      fast_err = std::max(fast_err, std::abs(wq - skew_factor(naive, th)));
      tab_err = std::max(tab_err, std::abs(wq - w));
    }
    out.push_back(make_check("factor", c.name, "w(theta) + w(mirror) = 1", pair_err, kFactorTol,
                             pair_err <= kFactorTol));
    out.push_back(make_check("factor", c.name, "w within [0, 1]", range_err, 0.0,
                             range_err == 0.0));
    out.push_back(make_check("factor", c.name, "posterior = 2 * symmetrized * w", identity_err,
                             kFactorTol, identity_err <= kFactorTol));
    if (c.glm) {
      out.push_back(make_check("factor", c.name, "fast factor matches naive", fast_err,
                               kFactorTol, fast_err <= kFactorTol));
    }
    out.push_back(make_check("factor", c.name, "library weight matches tabulated w", tab_err,
                             kFactorTol, tab_err <= kFactorTol));
  }

  if (wanted(opts, "sampler") && c.model.dim == 1 && !c.conjugate) {
    const SkewSymmetricApproximation q = c.skewed();
    std::vector<double> x(npts), cdf(npts, 0.0);
    for (std::size_t k = 0; k < npts; ++k) x[k] = grid.point(k)(0);
    for (std::size_t k = 1; k < npts; ++k) {
      cdf[k] = cdf[k - 1] + 0.5 * (x[k] - x[k - 1]) *
                                (std::exp(t.log_skew[k]) + std::exp(t.log_skew[k - 1]));
    }
    for (double& v : cdf) v /= cdf.back();

    Rng rng(derive_seed(opts.battery.seed, "sampler-" + c.name));
    SamplerTrace trace;
    const std::vector<Vector> draws = sample_skew(q, opts.ks_draws, rng, &trace);
    std::vector<double> values(draws.size());
    for (std::size_t s = 0; s < draws.size(); ++s) values[s] = draws[s](0);
    const KsResult ks = ks_test(std::move(values), x, cdf);
    std::ostringstream detail;
    detail << "KS statistic " << ks.statistic << " on " << opts.ks_draws << " draws";
    out.push_back(make_check("sampler", c.name, "KS p-value against grid CDF", ks.p_value,
                             kKsLevel, ks.p_value > kKsLevel, detail.str()));

    std::array<double, 10> kept{}, expect{}, var{};
    for (std::size_t s = 0; s < trace.weights.size(); ++s) {
      const double w = trace.weights[s];
      const int bin = std::clamp(static_cast<int>(w * 10.0), 0, 9);
      kept[bin] += trace.kept[s] ? 1.0 : 0.0;
      expect[bin] += w;
      var[bin] += w * (1.0 - w);
    }
    double worst_z = 0.0;
    bool ok = true;
    for (int b = 0; b < 10; ++b) {
      const double dev = std::abs(kept[b] - expect[b]);
      if (var[b] > 0.0) {
        worst_z = std::max(worst_z, dev / std::sqrt(var[b]));
      } else if (dev > 1e-9) {
        ok = false;
      }
    }
    out.push_back(make_check("sampler", c.name, "keep frequency per w decile (sigmas)", worst_z,
                             kFlipSigmas, ok && worst_z <= kFlipSigmas));
  }

  const bool need_div = wanted(opts, "equality") || wanted(opts, "inequality") ||
                        wanted(opts, "optimality") || wanted(opts, "degeneracy");
  if (!need_div) return;

  std::vector<Outcome> d_skew, d_sym, d_base;
  for (const auto& spec : divergence_battery()) {
    d_skew.push_back(try_divergence(spec, grid, t.log_post, t.log_skew));
    d_sym.push_back(try_divergence(spec, grid, t.log_sym_post, t.log_base));
    d_base.push_back(try_divergence(spec, grid, t.log_post, t.log_base));
  }
  const auto& battery = divergence_battery();

  if (wanted(opts, "equality")) {
    for (std::size_t i = 0; i < battery.size(); ++i) {
      const std::string check = battery[i].label + ": D(post||skewed) = D(sym post||base)";
      if (!d_skew[i].ok() || !d_sym[i].ok()) {
        out.push_back(make_check("equality", c.name, check, kInf, kEqualityTol, false,
                                 d_skew[i].ok() ? d_sym[i].error : d_skew[i].error));
        continue;
      }
      const double gap = std::abs(d_skew[i].value - d_sym[i].value);
      std::ostringstream detail;
      detail.precision(17);
      detail << "skewed " << d_skew[i].value << ", symmetrized " << d_sym[i].value;
      out.push_back(
          make_check("equality", c.name, check, gap, kEqualityTol, gap <= kEqualityTol,
                     detail.str()));
    }
  }

  if (wanted(opts, "inequality")) {
    for (std::size_t i = 0; i < battery.size(); ++i) {
      const bool ok = d_skew[i].ok() && d_sym[i].ok() && d_base[i].ok();
      const std::string err = !d_skew[i].ok()  ? d_skew[i].error
                              : !d_sym[i].ok() ? d_sym[i].error
                                               : d_base[i].error;
      const double excess_skew = ok ? d_skew[i].value - d_base[i].value : kInf;
      const double excess_sym = ok ? d_sym[i].value - d_base[i].value : kInf;
      out.push_back(make_check("inequality", c.name,
                               battery[i].label + ": D(post||skewed) <= D(post||base)",
                               excess_skew, kInequalitySlack,
                               ok && excess_skew <= kInequalitySlack, err));
      out.push_back(make_check("inequality", c.name,
                               battery[i].label + ": D(sym post||base) <= D(post||base)",
                               excess_sym, kInequalitySlack,
                               ok && excess_sym <= kInequalitySlack, err));
    }
  }

  if (wanted(opts, "optimality")) {
    Rng rng(derive_seed(opts.battery.seed, "optimality-" + c.name));
    std::vector<double> worst(battery.size(), kInf);
    std::vector<std::string> errors(battery.size());
    std::vector<double> lq(npts);
    const Matrix pts = grid_points(grid);
    for (int r = 0; r < opts.random_skewing_functions; ++r) {
      const RandomSkewingFunction w(c.base.center(), c.base.covariance(), rng);
      const Vector lw = w.log_values(pts);
      for (std::size_t k = 0; k < npts; ++k) lq[k] = kLog2 + t.log_base[k] + lw(k);
      for (std::size_t i = 0; i < battery.size(); ++i) {
        const Outcome o = try_divergence(battery[i], grid, t.log_post, lq);
        if (!o.ok()) {
          errors[i] = o.error;
          worst[i] = -kInf;
          continue;
        }
        if (d_skew[i].ok()) worst[i] = std::min(worst[i], o.value - d_skew[i].value);
      }
    }
    for (std::size_t i = 0; i < battery.size(); ++i) {
      const bool ok = d_skew[i].ok() && errors[i].empty();
      out.push_back(make_check(
          "optimality", c.name, battery[i].label + ": D(post||2fw) >= D(post||skewed)", worst[i],
          kInequalitySlack, ok && worst[i] >= -kInequalitySlack,
          ok ? std::to_string(opts.random_skewing_functions) + " random skewing functions"
             : (d_skew[i].ok() ? errors[i] : d_skew[i].error)));
    }
  }

  if (wanted(opts, "degeneracy") && c.conjugate) {
    double w_err = 0.0, q_err = 0.0;
    for (std::size_t k = 0; k < npts; ++k) {
      w_err = std::max(w_err, std::abs(t.weight[k] - 0.5));
      q_err = std::max(q_err, std::abs(std::exp(t.log_skew[k]) - std::exp(t.log_base[k])));
    }
    out.push_back(make_check("degeneracy", c.name, "w identically 1/2", w_err, kFactorTol,
                             w_err <= kFactorTol));
    out.push_back(make_check("degeneracy", c.name, "skewed equals base pointwise", q_err,
                             kFactorTol, q_err <= kFactorTol));
    for (std::size_t i = 0; i < battery.size(); ++i) {
      const double v = std::max(std::abs(d_skew[i].value), std::abs(d_base[i].value));
      out.push_back(make_check("degeneracy", c.name, battery[i].label + ": divergences vanish",
                               v, 1e-8, d_skew[i].ok() && d_base[i].ok() && v <= 1e-8));
    }
  }


}
}  // namespace

SkewSymmetricApproximation BatteryCase::skewed() const {
  return glm ? make_skew(base, *glm) : make_skew(base, model);
}

std::vector<BatteryCase> build_battery(const BatteryOptions& opts) {
  std::vector<BatteryCase> out;
  if (!opts.conjugate_only) {
    // Moderately skewed targets; alpha = 2 stays finite on the +/- 12 sd grid.
    Matrix x1 = Matrix::Ones(5, 1);
    Vector y1(5);
    y1 << 4, 7, 5, 8, 6;
    const GlmModel poisson(x1, y1, Family::poisson_log, Vector::Zero(1), Vector::Constant(1, 4.0),
                           names_of(1));
    add_glm_cases(out, "poisson1d", poisson,
                  {ApproxKind::laplace, ApproxKind::gvb, ApproxKind::gep, ApproxKind::snp}, false,
                  opts.seed);

    Rng rng(derive_seed(opts.seed, "battery-logistic2d"));
    Vector truth2(2);
    truth2 << 0.5, -1.0;
    const GlmModel logistic = simulate_glm(Family::bernoulli_logit, 200, truth2, true, rng);
    add_glm_cases(out, "logistic2d", logistic,
                  {ApproxKind::laplace, ApproxKind::gep, ApproxKind::snp}, false, opts.seed);

    Rng rng_p2(derive_seed(opts.seed, "battery-probit2d"));
    Vector truth_p2(2);
    truth_p2 << -0.3, 0.8;
    const GlmModel probit2 = simulate_glm(Family::bernoulli_probit, 80, truth_p2, true, rng_p2);
    add_glm_cases(out, "probit2d", probit2, {ApproxKind::laplace, ApproxKind::gep}, false,
                  opts.seed);

    Rng rng_p(derive_seed(opts.seed, "battery-probit1d"));
    const GlmModel probit =
        simulate_glm(Family::bernoulli_probit, 15, Vector::Constant(1, 0.8), false, rng_p);
    add_glm_cases(out, "probit1d", probit, {ApproxKind::laplace, ApproxKind::gep}, false,
                  opts.seed);
  }
  Rng rng_g(derive_seed(opts.seed, "battery-gaussian"));
  const GlmModel g1 =
      simulate_glm(Family::gaussian_identity, 10, Vector::Constant(1, 0.3), true, rng_g);
  add_glm_cases(out, "gaussian1d", g1, {ApproxKind::laplace, ApproxKind::gep}, true, opts.seed);
  Vector truth_g2(2);
  truth_g2 << -0.2, 0.7;
  const GlmModel g2 = simulate_glm(Family::gaussian_identity, 12, truth_g2, true, rng_g);
  add_glm_cases(out, "gaussian2d", g2, {ApproxKind::laplace}, true, opts.seed);
  return out;
}

GridTables tabulate(const BatteryCase& c, std::optional<GridSpec> spec) {
  const Vector& center = c.base.center();
  GridTables t{QuadratureGrid(spec ? *spec : default_grid(center, c.base.covariance())),
               {}, {}, {}, {}, {}};
  const QuadratureGrid& grid = t.grid;
  const std::size_t npts = grid.size();
  const Matrix pts = grid_points(grid);
  const Matrix mirrored = (2.0 * center).replicate(1, pts.cols()) - pts;

  const std::vector<double> lp = log_posterior_columns(c, pts);
  const std::vector<double> lp_mirror = log_posterior_columns(c, mirrored);
  t.log_base.resize(npts);
  t.log_skew.resize(npts);
  t.weight.resize(npts);
  for (std::size_t k = 0; k < npts; ++k) {
    t.log_base[k] = c.base.log_pdf(pts.col(k));
    t.weight[k] = factor_from_log_ratio(lp[k] - lp_mirror[k]);
    t.log_skew[k] = t.weight[k] > 0.0 ? kLog2 + t.log_base[k] + std::log(t.weight[k]) : -kInf;
  }
  const double log_z = grid.log_integral(lp);
  if (!std::isfinite(log_z)) throw EvaluationError("posterior has no finite mass on the grid");
  t.log_post.resize(npts);
  t.log_sym_post.resize(npts);
  for (std::size_t k = 0; k < npts; ++k) {
    t.log_post[k] = lp[k] - log_z;
    t.log_sym_post[k] = log_add_exp(lp[k] - log_z, lp_mirror[k] - log_z) - kLog2;
  }
  return t;
}

const std::vector<DivergenceSpec>& divergence_battery() {
  static const std::vector<DivergenceSpec> specs = {
      {"tv", DivergenceKind::tv, 0.0},
      {"alpha=-1", DivergenceKind::alpha, -1.0},
      {"alpha=0.5", DivergenceKind::alpha, 0.5},
      {"alpha=2", DivergenceKind::alpha, 2.0},
      {"kl_forward", DivergenceKind::kl_forward, 0.0},
      {"kl_reverse", DivergenceKind::kl_reverse, 0.0},
  };
  return specs;
}

DivergenceEstimate evaluate_divergence(const DivergenceSpec& spec, const QuadratureGrid& grid,
                                       std::span<const double> lp, std::span<const double> lq) {
  switch (spec.kind) {
    case DivergenceKind::tv: return tv_grid(grid, lp, lq);
    case DivergenceKind::alpha: return alpha_div_grid(grid, lp, lq, spec.alpha);
    case DivergenceKind::kl_forward: return kl_grid(grid, lp, lq, KlDirection::forward);
    case DivergenceKind::kl_reverse: return kl_grid(grid, lp, lq, KlDirection::reverse);
  }
  throw std::invalid_argument("unknown divergence kind");
}

nlohmann::json CheckResult::to_json() const {
  nlohmann::json j;
  j["suite"] = suite;
  j["case"] = case_name;
  j["check"] = check;
  j["value"] = std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(std::to_string(value));
  j["tolerance"] = tolerance;
  j["passed"] = passed;
  if (!detail.empty()) j["detail"] = detail;
  return j;
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

bool VerifyReport::suite_passed(const std::string& suite) const {
  return std::all_of(checks.begin(), checks.end(), [&](const CheckResult& c) {
    return c.suite != suite || c.passed;
  });
}

int VerifyReport::suite_size(const std::string& suite) const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(),
                                        [&](const CheckResult& c) { return c.suite == suite; }));
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json j;
  j["passed"] = passed();
  j["cases"] = case_names;
  nlohmann::json suites = nlohmann::json::array();
  for (const auto& name : verify_suite_names()) {
    if (suite_size(name) == 0) continue;
    nlohmann::json s;
    s["name"] = name;
    s["passed"] = suite_passed(name);
    s["checks"] = nlohmann::json::array();
    for (const auto& c : checks) {
      if (c.suite == name) s["checks"].push_back(c.to_json());
    }
    suites.push_back(std::move(s));
  }
  j["suites"] = std::move(suites);
  return j;
}

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {"symmetry",   "normalization", "factor",
                                                 "equality",   "inequality",    "optimality",
                                                 "sampler",    "degeneracy"};
  return names;
}

VerifyReport run_verify(const VerifyOptions& opts) {
  for (const auto& s : opts.suites) {
    const auto& all = verify_suite_names();
    if (std::find(all.begin(), all.end(), s) == all.end()) {
      throw ConfigError("unknown verify suite \"" + s + "\"");
    }
  }
  const std::vector<BatteryCase> battery = build_battery(opts.battery);
  std::vector<std::vector<CheckResult>> per_case(battery.size());
  parallel_for(battery.size(), [&](std::size_t i) { run_case(battery[i], opts, per_case[i]); });
  VerifyReport report;
  for (std::size_t i = 0; i < battery.size(); ++i) {
    report.case_names.push_back(battery[i].name);
    for (auto& c : per_case[i]) report.checks.push_back(std::move(c));
  }
  return report;
}

double kolmogorov_pvalue(double statistic, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * statistic;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> draws, const std::vector<double>& x,
                 const std::vector<double>& cdf) {
  if (draws.empty()) throw std::invalid_argument("ks_test needs draws");
  if (x.size() != cdf.size() || x.size() < 2) throw std::invalid_argument("bad CDF table");
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double v = draws[i];
    double f;
    if (v <= x.front()) {
      f = 0.0;
    } else if (v >= x.back()) {
      f = 1.0;
    } else {
      const auto it = std::upper_bound(x.begin(), x.end(), v);
      const std::size_t k = static_cast<std::size_t>(it - x.begin());
      const double t = (v - x[k - 1]) / (x[k] - x[k - 1]);
      f = cdf[k - 1] + t * (cdf[k] - cdf[k - 1]);
    }
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return {d, kolmogorov_pvalue(d, draws.size())};
}

}  // namespace skewfit
