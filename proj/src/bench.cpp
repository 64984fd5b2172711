#include "skewfit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "skewfit/parallel.hpp"
#include "skewfit/skew.hpp"
#include "skewfit/special.hpp"

#ifndef SKEWFIT_VERSION
#define SKEWFIT_VERSION "0.1.0-unknown"
#endif

namespace skewfit {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

QuartileSummary summarize_columns(const Matrix& m) {
  const Eigen::Index d = m.cols();
  QuartileSummary s{Vector(d), Vector(d), Vector(d), Vector(d)};
  std::vector<double> col(m.rows());
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) col[i] = m(i, j);
    std::sort(col.begin(), col.end());
    s.q1(j) = quantile_type7_sorted(col, 0.25);
    s.median(j) = quantile_type7_sorted(col, 0.5);
    s.q3(j) = quantile_type7_sorted(col, 0.75);
    // anchored at the first draw, so constant columns average exactly
    const double anchor = m(0, j);
    s.mean(j) = anchor + (m.col(j).array() - anchor).mean();
  }
  return s;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json quartiles_json(const QuartileSummary& s) {
  return {{"q1", to_std(s.q1)},
          {"median", to_std(s.median)},
          {"q3", to_std(s.q3)},
          {"mean", to_std(s.mean)}};
}

double mean_abs_diff(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("summary dimensions differ");
  return (a - b).cwiseAbs().mean();
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
}  // namespace

nlohmann::json FunctionalSummary::to_json() const {
  nlohmann::json j;
  j["n_samples"] = n_samples;
  j["theta"] = quartiles_json(theta);
  if (mu) j["mu"] = quartiles_json(*mu);
  j["warnings"] = warnings;
  return j;
}

FunctionalSummary summarize(const Matrix& samples, const GlmModel* model) {
  if (samples.rows() == 0) throw std::invalid_argument("summarize needs samples");
  FunctionalSummary out;
  out.n_samples = static_cast<int>(samples.rows());
  if (samples.rows() < 1000) {
    out.warnings.push_back("only " + std::to_string(samples.rows()) +
                           " draws; summaries are imprecise");
  }
  out.theta = summarize_columns(samples);
  if (model) {
    if (model->dim() != samples.cols()) throw std::invalid_argument("model dimension mismatch");
    Matrix eta = samples * model->design().transpose();  // draws x observations
    eta = eta.unaryExpr([f = model->family()](double e) { return family_mean(f, e); });
    out.mu = summarize_columns(eta);
  }
  return out;
}

// ---------------------------------------------------------------------------

const ErrorRow& ErrorTable::row(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw std::out_of_range("no error-table row named " + name);
}

void ErrorTable::mark_best(const std::vector<std::pair<std::string, std::string>>& pairs) {
  for (const auto& [a, b] : pairs) {
    auto ia = std::find_if(rows.begin(), rows.end(), [&](const ErrorRow& r) { return r.name == a; });
    auto ib = std::find_if(rows.begin(), rows.end(), [&](const ErrorRow& r) { return r.name == b; });
    if (ia == rows.end() || ib == rows.end()) continue;
    for (int c = 0; c < 8; ++c) {
      const double va = ia->cells[c], vb = ib->cells[c];
      if (std::isnan(va) || std::isnan(vb)) continue;
      ia->best[c] = va <= vb;
      ib->best[c] = vb <= va;
    }
  }
}

int ErrorTable::columns_won(const std::string& a, const std::string& b) const {
  const ErrorRow& ra = row(a);
  const ErrorRow& rb = row(b);
  int won = 0;
  for (int c = 0; c < 8; ++c) won += ra.cells[c] < rb.cells[c] ? 1 : 0;
  return won;
}

nlohmann::json ErrorTable::to_json() const {
  nlohmann::json j;
  j["columns"] = std::vector<std::string>(kErrorColumns.begin(), kErrorColumns.end());
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json jr;
    jr["name"] = r.name;
    jr["cells"] = nlohmann::json::array();
    for (double v : r.cells) jr["cells"].push_back(number_or_null(v));
    jr["best"] = std::vector<bool>(r.best.begin(), r.best.end());
    j["rows"].push_back(std::move(jr));
  }
  return j;
}

std::string ErrorTable::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "approximation";
  for (const char* c : kErrorColumns) os << ',' << c;
  os << '\n';
  for (const auto& r : rows) {
    os << r.name;
    for (double v : r.cells) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

ErrorTable ErrorTable::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty error-table CSV");
  ErrorTable t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    ErrorRow r;
    std::getline(ls, r.name, ',');
    for (int c = 0; c < 8; ++c) {
      if (!std::getline(ls, field, ',')) throw std::invalid_argument("short error-table row");
      r.cells[c] = field == "nan" ? kNaN : std::stod(field);
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

ErrorTable error_table(const std::vector<std::pair<std::string, FunctionalSummary>>& summaries,
                       const FunctionalSummary& baseline) {
  ErrorTable t;
  for (const auto& [name, s] : summaries) {
    ErrorRow r;
    r.name = name;
    r.cells[0] = mean_abs_diff(s.theta.q1, baseline.theta.q1);
    r.cells[1] = mean_abs_diff(s.theta.median, baseline.theta.median);
    r.cells[2] = mean_abs_diff(s.theta.q3, baseline.theta.q3);
    r.cells[3] = mean_abs_diff(s.theta.mean, baseline.theta.mean);
    if (s.mu && baseline.mu) {
      r.cells[4] = mean_abs_diff(s.mu->q1, baseline.mu->q1);
      r.cells[5] = mean_abs_diff(s.mu->median, baseline.mu->median);
      r.cells[6] = mean_abs_diff(s.mu->q3, baseline.mu->q3);
      r.cells[7] = mean_abs_diff(s.mu->mean, baseline.mu->mean);
    } else {
      for (int c = 4; c < 8; ++c) r.cells[c] = kNaN;
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

// ---------------------------------------------------------------------------

RateFamily exponential_rate_family() {
  RateFamily fam;
  fam.name = "exponential_rate";
  fam.simulate = [](int n, Rng& rng) {
    std::exponential_distribution<double> expo(1.0);  // theta_0 = 0
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += expo(rng);
    const double nn = n;
    constexpr double kPriorVar = 100.0;
    ModelSpec m;
    m.dim = 1;
    m.names = {"theta"};
    m.log_prior = [](const Vector& t) { return -0.5 * t(0) * t(0) / kPriorVar; };
    m.log_lik = [nn, s](const Vector& t) { return nn * t(0) - std::exp(t(0)) * s; };
    m.grad = [nn, s](const Vector& t) {
      return Vector::Constant(1, nn - std::exp(t(0)) * s - t(0) / kPriorVar);
    };
    m.hess = [s](const Vector& t) {
      return Matrix::Constant(1, 1, -std::exp(t(0)) * s - 1.0 / kPriorVar);
    };
    auto higher = [s](int order) {
      return [s, order](const Vector& t) {
        DerivativeTensor d(1, order);
        d.data[0] = -std::exp(t(0)) * s;
        return d;
      };
    };
    m.deriv3 = higher(3);
    m.deriv4 = higher(4);
    return m;
  };
  return fam;
}

RateFamily gaussian_mean_family() {
  RateFamily fam;
  fam.name = "gaussian_mean";
  fam.simulate = [](int n, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += normal(rng);
    const double nn = n;
    constexpr double kPriorVar = 100.0;
    ModelSpec m;
    m.dim = 1;
    m.names = {"theta"};
    m.log_prior = [](const Vector& t) { return -0.5 * t(0) * t(0) / kPriorVar; };
    m.log_lik = [nn, s](const Vector& t) { return s * t(0) - 0.5 * nn * t(0) * t(0); };
    m.grad = [nn, s](const Vector& t) {
      return Vector::Constant(1, s - nn * t(0) - t(0) / kPriorVar);
    };
    m.hess = [nn](const Vector&) { return Matrix::Constant(1, 1, -nn - 1.0 / kPriorVar); };
    auto zero = [](int order) {
      return [order](const Vector&) { return DerivativeTensor(1, order); };
    };
    m.deriv3 = zero(3);
    m.deriv4 = zero(4);
    return m;
  };
  return fam;
}

nlohmann::json RateCurve::to_json() const {
  nlohmann::json j;
  j["variant"] = variant;
  j["sample_sizes"] = sample_sizes;
  j["tv_values"] = tv_values;
  j["replicate_tv"] = replicate_tv;
  j["slope_defined"] = slope_defined;
  j["fitted_slope"] = slope_defined ? nlohmann::json(fitted_slope) : nlohmann::json(nullptr);
  j["slope_stderr"] = slope_defined ? nlohmann::json(slope_stderr) : nlohmann::json(nullptr);
  if (!slope_note.empty()) j["slope_note"] = slope_note;
  return j;
}

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("need two points");
  const double m = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("x values are all equal");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  f.stderr_slope = x.size() > 2 ? std::sqrt(sse / (m - 2.0) / sxx) : 0.0;
  return f;
}

namespace {
struct ReplicateTv {
  double f1 = 0.0, q1 = 0.0, q2 = 0.0;
};

ReplicateTv replicate_tv(const ModelSpec& model, const RateOptions& opts) {
  const SymmetricApproximation laplace = fit_laplace(model, Vector::Zero(model.dim));
  const SymmetricApproximation snp = build_snp(model, laplace);
  const SkewSymmetricApproximation q1 = make_skew(laplace, model);
  const SkewSymmetricApproximation q2 = make_skew(snp, model);
  auto attempt = [&](double width, int points) {
    const QuadratureGrid grid(
        default_grid(laplace.center(), laplace.covariance(), width, points));
    std::vector<double> lp = grid.evaluate(
        [&](const Vector& t) { return log_unnorm_posterior(model, t); });
    const double log_z = grid.log_integral(lp);
    for (double& v : lp) v -= log_z;
    const auto lf = grid.evaluate([&](const Vector& t) { return laplace.log_pdf(t); });
    const auto lq1 = grid.evaluate([&](const Vector& t) { return skew_logpdf(q1, t); });
    const auto lq2 = grid.evaluate([&](const Vector& t) { return skew_logpdf(q2, t); });
    return ReplicateTv{tv_grid(grid, lp, lf).value, tv_grid(grid, lp, lq1).value,
                       tv_grid(grid, lp, lq2).value};
  };
  try {
    return attempt(opts.grid_width, opts.grid_points);
  } catch (const DomainTooSmallError&) {
    // Concentrated posterior: fall back to +/- 12 sd at four times the density.
    return attempt(12.0, 4 * opts.grid_points);
  }
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_type7_sorted(v, 0.5);
}
}  // namespace

std::vector<RateCurve> rate_experiment(const RateFamily& family, const RateOptions& opts) {
  if (opts.sample_sizes.empty()) throw ConfigError("rates.sample_sizes must not be empty");
  for (std::size_t i = 0; i < opts.sample_sizes.size(); ++i) {
    if (opts.sample_sizes[i] < 1 || (i > 0 && opts.sample_sizes[i] <= opts.sample_sizes[i - 1])) {
      throw ConfigError("rates.sample_sizes must be positive and strictly increasing");
    }
  }
  if (opts.replicates < 1) throw ConfigError("rates.replicates must be positive");

  const std::size_t n_sizes = opts.sample_sizes.size();
  const std::size_t reps = static_cast<std::size_t>(opts.replicates);
  std::vector<ReplicateTv> results(n_sizes * reps);
  parallel_for(results.size(), [&](std::size_t job) {
    const int n = opts.sample_sizes[job / reps];
    const std::size_t r = job % reps;
    Rng rng(derive_seed(opts.seed, family.name + "-n" + std::to_string(n) + "-rep" +
                                       std::to_string(r)));
    results[job] = replicate_tv(family.simulate(n, rng), opts);
  });

  std::vector<RateCurve> curves(3);
  const char* names[3] = {"f1", "q1", "q2"};
  for (int v = 0; v < 3; ++v) {
    RateCurve& c = curves[v];
    c.variant = names[v];
    c.sample_sizes = opts.sample_sizes;
    for (std::size_t i = 0; i < n_sizes; ++i) {
      std::vector<double> tv(reps);
      for (std::size_t r = 0; r < reps; ++r) {
        const ReplicateTv& x = results[i * reps + r];
        tv[r] = v == 0 ? x.f1 : (v == 1 ? x.q1 : x.q2);
      }
      c.tv_values.push_back(median_of(tv));
      c.replicate_tv.push_back(std::move(tv));
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < n_sizes; ++i) {
      if (c.tv_values[i] > 1e-12) {
        lx.push_back(std::log(static_cast<double>(c.sample_sizes[i])));
        ly.push_back(std::log(c.tv_values[i]));
      }
    }
    if (n_sizes < 2) {
      c.slope_note = "single sample size: slope undefined";
    } else if (lx.size() < 2) {
      c.slope_note = "total variation below 1e-12 at all but at most one n: slope fit skipped";
    } else {
      const SlopeFit fit = fit_slope(lx, ly);
      c.fitted_slope = fit.slope;
      c.slope_stderr = fit.stderr_slope;
      c.slope_defined = true;
    }
  }
  return curves;
}

// ---------------------------------------------------------------------------

std::string version_string() { return SKEWFIT_VERSION; }

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json report_json(const Report& report, const std::string& timestamp) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["command"] = report.command;
  j["version"] = version_string();
  j["seed"] = report.seed;
  j["timestamp"] = timestamp;
  j["config"] = report.config;
  j["tables"] = nlohmann::json::array();
  for (const auto& [name, table] : report.tables) {
    nlohmann::json t = table.to_json();
    t["name"] = name;
    j["tables"].push_back(std::move(t));
  }
  j["curves"] = nlohmann::json::array();
  for (const auto& c : report.curves) j["curves"].push_back(c.to_json());
  for (const auto& [k, v] : report.extra.items()) j[k] = v;
  return j;
}

std::string emit_report(const Report& report, const std::string& dir) {
  if (report.tables.empty() && report.curves.empty() && report.extra.empty()) {
    throw std::invalid_argument("report needs at least one table or curve");
  }
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  const std::string path = (fs::path(dir) / "report.json").string();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << report_json(report, utc_timestamp()).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
  for (const auto& [name, table] : report.tables) {
    const std::string csv = (fs::path(dir) / (name + ".csv")).string();
    std::ofstream cs(csv);
    if (!cs) throw std::runtime_error("cannot write " + csv);
    cs << table.to_csv();
  }
  return path;
}

}  // namespace skewfit
