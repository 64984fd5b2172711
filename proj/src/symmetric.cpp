#include "skewfit/symmetric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skewfit/special.hpp"

namespace skewfit {

namespace {

constexpr double kRoundoff = std::numeric_limits<double>::epsilon();
constexpr double kInf = std::numeric_limits<double>::infinity();

Vector standard_normal(Rng& rng, int d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(d);
  for (int i = 0; i < d; ++i) z(i) = normal(rng);
  return z;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

}  // namespace

std::string to_string(ApproxKind k) {
  switch (k) {
    case ApproxKind::laplace: return "laplace";
    case ApproxKind::gvb: return "gvb";
    case ApproxKind::gep: return "gep";
    case ApproxKind::snp: return "snp";
  }
  return "unknown";
}

ApproxKind approx_kind_from_string(const std::string& name) {
  if (name == "laplace" || name == "la") return ApproxKind::laplace;
  if (name == "gvb") return ApproxKind::gvb;
  if (name == "gep" || name == "ep") return ApproxKind::gep;
  if (name == "snp") return ApproxKind::snp;
  throw ConfigError("unknown approximation kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// GaussianApproximation

GaussianApproximation::GaussianApproximation(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
    throw std::invalid_argument("covariance shape does not match mean");
  }
  covariance_ = 0.5 * (covariance_ + covariance_.transpose());
  Eigen::LLT<Matrix> llt(covariance_);
  if (llt.info() != Eigen::Success) {
    throw IndefiniteCurvatureError("covariance is not positive definite");
  }
  factor_ = llt.matrixL();
  log_norm_const_ =
      -0.5 * dim() * kLog2Pi - factor_.diagonal().array().log().sum();
}

GaussianApproximation GaussianApproximation::from_precision(Vector mean,
                                                            const Matrix& precision) {
  Eigen::LLT<Matrix> llt(0.5 * (precision + precision.transpose()));
  if (llt.info() != Eigen::Success) {
    throw IndefiniteCurvatureError("precision is not positive definite");
  }
  const Matrix cov = llt.solve(Matrix::Identity(precision.rows(), precision.cols()));
  return GaussianApproximation(std::move(mean), cov);
}

double GaussianApproximation::log_pdf(const Vector& theta) const {
  const Vector z = factor_.triangularView<Eigen::Lower>().solve(theta - mean_);
  return log_norm_const_ - 0.5 * z.squaredNorm();
}

Vector GaussianApproximation::draw(Rng& rng) const {
  return mean_ + factor_ * standard_normal(rng, dim());
}

// ---------------------------------------------------------------------------
// SNP

double gaussian_moment(int p, int q, const Matrix& cov) {
  if (p < 0 || q < 0) return 0.0;
  if (cov.rows() == 1 && q > 0) throw std::invalid_argument("1D moment with q > 0");
  if (p == 0 && q == 0) return 1.0;
  if ((p + q) % 2 == 1) return 0.0;
  // Stein/Isserlis recursion: E[h_1 f(h)] = sum_j S_1j E[d_j f(h)].
  if (p > 0) {
    double r = (p - 1) * cov(0, 0) * gaussian_moment(p - 2, q, cov);
    if (q > 0) r += q * cov(0, 1) * gaussian_moment(p - 1, q - 1, cov);
    return r;
  }
  return (q - 1) * cov(1, 1) * gaussian_moment(0, q - 2, cov);
}

namespace {
// Coefficients c[p] of h1^p h2^(k-p) for the homogeneous form <T, h^k>.
std::vector<double> form_coefficients(const DerivativeTensor& t) {
  std::vector<double> c(t.order + 1, 0.0);
  for (std::size_t a = 0; a < t.data.size(); ++a) {
    int zeros = 0;
    std::size_t r = a;
    for (int l = 0; l < t.order; ++l) {
      if (r % t.dim == 0) ++zeros;
      r /= t.dim;
    }
    c[zeros] += t.data[a];
  }
  return c;
}

double expected_product(const std::vector<double>& c1, const std::vector<double>& c2,
                        const Matrix& cov) {
  const int k1 = static_cast<int>(c1.size()) - 1;
  const int k2 = static_cast<int>(c2.size()) - 1;
  double s = 0.0;
  for (int p1 = 0; p1 <= k1; ++p1) {
    for (int p2 = 0; p2 <= k2; ++p2) {
      if (c1[p1] == 0.0 || c2[p2] == 0.0) continue;
      s += c1[p1] * c2[p2] * gaussian_moment(p1 + p2, k1 + k2 - p1 - p2, cov);
    }
  }
  return s;
}
}  // namespace

SnpApproximation::SnpApproximation(Vector mode, const Matrix& covariance, DerivativeTensor l3,
                                   DerivativeTensor l4)
    : gauss_(std::move(mode), covariance), l3_(std::move(l3)), l4_(std::move(l4)) {
  const int d = gauss_.dim();
  if (d > 2) throw UnsupportedError("SNP approximation is limited to d <= 2");
  if (l3_.dim != d || l4_.dim != d || l3_.order != 3 || l4_.order != 4) {
    throw std::invalid_argument("SNP tensors have the wrong shape");
  }
  precision_ = gauss_.covariance().inverse();

  const Matrix& cov = gauss_.covariance();
  const std::vector<double> one{1.0};
  auto c4 = form_coefficients(l4_);
  auto c3 = form_coefficients(l3_);
  for (auto& v : c4) v /= 24.0;
  for (auto& v : c3) v /= 6.0;
  // For d = 1 the forms are pure powers of h1: only the last coefficient.
  const double ea = expected_product(c4, one, cov);
  const double ea2 = expected_product(c4, c4, cov);
  const double eb2 = expected_product(c3, c3, cov);
  poly_normalizer_ = 1.0 + ea + 0.5 * ea2 + 0.5 * eb2;
  prepare_sampler();
}

double SnpApproximation::polynomial(const Vector& h) const {
  const double a = l4_.contract(h) / 24.0;
  const double b = l3_.contract(h) / 6.0;
  return 1.0 + a + 0.5 * a * a + 0.5 * b * b;
}

double SnpApproximation::log_pdf(const Vector& theta) const {
  return gauss_.log_pdf(theta) + std::log(polynomial(theta - gauss_.mean())) -
         std::log(poly_normalizer_);
}

void SnpApproximation::prepare_sampler() {
  if (dim() == 1) {
    constexpr int kPoints = 4096;
    const double sd = std::sqrt(gauss_.covariance()(0, 0));
    const double lo = mode()(0) - 10.0 * sd;
    const double hi = mode()(0) + 10.0 * sd;
    grid_.resize(kPoints);
    cdf_.assign(kPoints, 0.0);
    std::vector<double> pdf(kPoints);
    Vector x(1);
    for (int i = 0; i < kPoints; ++i) {
      grid_[i] = lo + (hi - lo) * i / (kPoints - 1);
      x(0) = grid_[i];
      pdf[i] = std::exp(log_pdf(x));
    }
    for (int i = 1; i < kPoints; ++i) {
      cdf_[i] = cdf_[i - 1] + 0.5 * (pdf[i] + pdf[i - 1]) * (grid_[i] - grid_[i - 1]);
    }
    const double total = cdf_.back();
    for (auto& c : cdf_) c /= total;
    return;
  }
  // Envelope of log[phi(z) P(Lz) / phi_s(z)] over a polar grid.
  const Matrix& L = gauss_.covariance_factor();
  const double s = inflation_;
  double best = -kInf;
  for (int ri = 0; ri <= 400; ++ri) {
    const double r = 0.05 * ri;
    for (int ai = 0; ai < 720; ++ai) {
      const double ang = M_PI * ai / 720.0;  // P is even: half circle suffices
      Vector z(2);
      z << r * std::cos(ang), r * std::sin(ang);
      const double v = std::log(polynomial(L * z)) - 0.5 * r * r * (1.0 - 1.0 / (s * s));
      best = std::max(best, v);
    }
  }
  log_envelope_ = best + std::log(1.1);
}

Vector SnpApproximation::draw(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (dim() == 1) {
    const double u = unif(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
    i = std::clamp<std::size_t>(i, 1, cdf_.size() - 1);
    const double c0 = cdf_[i - 1], c1 = cdf_[i];
    const double t = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
    Vector out(1);
    out(0) = grid_[i - 1] + t * (grid_[i] - grid_[i - 1]);
    return out;
  }
  const Matrix& L = gauss_.covariance_factor();
  const double s = inflation_;
  for (;;) {
    const Vector z = s * standard_normal(rng, 2);
    const double log_ratio =
        std::log(polynomial(L * z)) - 0.5 * z.squaredNorm() * (1.0 - 1.0 / (s * s));
    if (std::log(unif(rng)) <= log_ratio - log_envelope_) return mode() + L * z;
  }
}

// ---------------------------------------------------------------------------
// SymmetricApproximation

SymmetricApproximation::SymmetricApproximation(ApproxKind kind, GaussianApproximation gauss)
    : kind_(kind), density_(std::move(gauss)) {
  if (kind == ApproxKind::snp) throw std::invalid_argument("SNP needs an SnpApproximation");
}

SymmetricApproximation::SymmetricApproximation(SnpApproximation snp)
    : kind_(ApproxKind::snp), density_(std::move(snp)) {}

int SymmetricApproximation::dim() const { return static_cast<int>(center().size()); }

const Vector& SymmetricApproximation::center() const {
  if (auto* g = std::get_if<GaussianApproximation>(&density_)) return g->mean();
  return std::get<SnpApproximation>(density_).mode();
}

double SymmetricApproximation::log_pdf(const Vector& theta) const {
  return std::visit([&](const auto& d) { return d.log_pdf(theta); }, density_);
}

Vector SymmetricApproximation::draw(Rng& rng) const {
  return std::visit([&](const auto& d) { return d.draw(rng); }, density_);
}

const GaussianApproximation* SymmetricApproximation::gaussian() const {
  return std::get_if<GaussianApproximation>(&density_);
}

const SnpApproximation* SymmetricApproximation::snp() const {
  return std::get_if<SnpApproximation>(&density_);
}

const Matrix& SymmetricApproximation::covariance() const {
  if (auto* g = gaussian()) return g->covariance();
  return snp()->covariance();
}

namespace {
nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (int j = 0; j < m.cols(); ++j) row[j] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const int r = static_cast<int>(j.size());
  const int c = r > 0 ? static_cast<int>(j[0].size()) : 0;
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

DerivativeTensor tensor_from_json(const nlohmann::json& j, int d, int order) {
  DerivativeTensor t(d, order);
  const auto v = j.get<std::vector<double>>();
  if (v.size() != t.data.size()) throw std::invalid_argument("tensor size mismatch");
  t.data = v;
  return t;
}
}  // namespace

nlohmann::json SymmetricApproximation::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind_);
  j["dim"] = dim();
  j["center"] = std::vector<double>(center().data(), center().data() + dim());
  j["covariance"] = matrix_to_json(covariance());
  if (const auto* s = snp()) {
    j["l3"] = s->l3().data;
    j["l4"] = s->l4().data;
    j["poly_normalizer"] = s->poly_normalizer();
  }
  return j;
}

SymmetricApproximation SymmetricApproximation::from_json(const nlohmann::json& j) {
  const ApproxKind kind = approx_kind_from_string(j.at("kind").get<std::string>());
  const int d = j.at("dim").get<int>();
  Vector center = vector_from_json(j.at("center"));
  Matrix cov = matrix_from_json(j.at("covariance"));
  if (center.size() != d || cov.rows() != d) throw std::invalid_argument("dimension mismatch");
  if (kind == ApproxKind::snp) {
    return SymmetricApproximation(SnpApproximation(std::move(center), cov,
                                                   tensor_from_json(j.at("l3"), d, 3),
                                                   tensor_from_json(j.at("l4"), d, 4)));
  }
  return SymmetricApproximation(kind, GaussianApproximation(std::move(center), std::move(cov)));
}

// ---------------------------------------------------------------------------
// Laplace

SymmetricApproximation fit_laplace(const ModelSpec& model, const Vector& init,
                                   const LaplaceOptions& opts) {
  if (init.size() != model.dim) throw std::invalid_argument("init has wrong dimension");
  auto f = [&](const Vector& t) { return log_unnorm_posterior(model, t); };
  auto grad = [&](const Vector& t) { return model.grad ? model.grad(t) : fd_gradient(model, t); };
  auto hess = [&](const Vector& t) { return model.hess ? model.hess(t) : fd_hessian(model, t); };

  Vector theta = init;
  double fx = f(theta);
  if (!std::isfinite(fx)) throw EvaluationError("log-posterior not finite at the initial point");

  int it = 0;
  Vector g = grad(theta);
  bool converged = false;
  for (; it < opts.max_iter; ++it) {
    if (g.norm() <= opts.grad_tol * (1.0 + theta.norm())) {
      converged = true;
      break;
    }
    const Matrix h = hess(theta);
    Eigen::LLT<Matrix> llt(-h);
    Vector dir;
    bool newton = llt.info() == Eigen::Success;
    if (newton) {
      dir = llt.solve(g);
    } else {
      // Indefinite: steepest ascent scaled by the largest curvature.
      const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
      dir = g / scale;
    }
    const double slope = g.dot(dir);
    double step = 1.0;
    bool accepted = false;
    Vector cand;
    double fc = -kInf;
    for (int k = 0; k < 60; ++k) {
      cand = theta + step * dir;
      if (cand == theta) break;
      // Expected gain below the resolution of fx: Armijo would accept any step.
      if (opts.armijo_c * step * slope <= 4.0 * kRoundoff * std::abs(fx)) break;
      fc = f(cand);
      if (std::isfinite(fc) && fc >= fx + opts.armijo_c * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted && newton) {
      // Near the optimum the objective is flat to rounding; accept the full
      // Newton step if it shrinks the gradient.
      cand = theta + dir;
      const Vector gc = grad(cand);
      if (gc.allFinite() && gc.norm() < g.norm()) {
        theta = cand;
        fx = f(theta);
        g = gc;
        continue;
      }
    }
    if (!accepted) break;
    theta = cand;
    fx = fc;
    g = grad(theta);
  }
  if (!converged) {
    throw NonConvergenceError("Newton MAP search did not converge after " +
                                  std::to_string(it) + " iterations (|grad| = " +
                                  std::to_string(g.norm()) + ")",
                              theta);
  }
  const Matrix h = hess(theta);
  Eigen::LLT<Matrix> llt(-0.5 * (h + h.transpose()));
  if (llt.info() != Eigen::Success) {
    throw IndefiniteCurvatureError("negative Hessian at the mode is not positive definite");
  }
  const Matrix cov = llt.solve(Matrix::Identity(model.dim, model.dim));
  SymmetricApproximation out(ApproxKind::laplace, GaussianApproximation(theta, cov));
  out.diagnostics.iterations = it;
  out.diagnostics.gradient_norm = g.norm();
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian VB

SymmetricApproximation fit_gvb(const ModelSpec& model, const GaussianApproximation& init,
                               const GvbOptions& opts) {
  const int d = model.dim;
  if (init.dim() != d) throw std::invalid_argument("init has wrong dimension");
  if (opts.mc_samples < 1 || opts.iterations < 1) {
    throw std::invalid_argument("GVB needs positive iterations and samples");
  }
  if (!(opts.average_from >= 0.0 && opts.average_from < 1.0)) {
    throw std::invalid_argument("GVB average_from must lie in [0, 1)");
  }
  auto grad = [&](const Vector& t) { return model.grad ? model.grad(t) : fd_gradient(model, t); };

  Vector mean = init.mean();
  Matrix factor = init.covariance_factor();
  Vector raw(d);
  for (int i = 0; i < d; ++i) raw(i) = softplus_inverse(factor(i, i));

  Rng rng(opts.seed);
  Vector acc_mean = Vector::Zero(d);
  Matrix acc_factor = Matrix::Zero(d, d);  // diagonal holds the raw-scale entry
  FitDiagnostics diag;
  diag.elbo_trace.reserve(opts.iterations);
  const double entropy_const = 0.5 * d * (1.0 + kLog2Pi);
  const int avg_start = static_cast<int>(opts.average_from * opts.iterations) + 1;
  Vector avg_mean = Vector::Zero(d);
  Matrix avg_factor = Matrix::Zero(d, d);
  int n_avg = 0;

  for (int t = 1; t <= opts.iterations; ++t) {
    Vector g_mean = Vector::Zero(d);
    Matrix g_factor = Matrix::Zero(d, d);
    double lp_sum = 0.0;
    for (int s = 0; s < opts.mc_samples; ++s) {
      const Vector z = standard_normal(rng, d);
      const Vector theta = mean + factor.triangularView<Eigen::Lower>() * z;
      const double lp = log_unnorm_posterior(model, theta);
      const Vector g = grad(theta);
      if (!std::isfinite(lp) || !g.allFinite()) {
        throw StepSizeError("ELBO estimate diverged at iteration " + std::to_string(t) +
                            "; reduce step_size (currently " +
                            std::to_string(opts.step_size) + ")");
      }
      lp_sum += lp;
      g_mean += g;
      g_factor.triangularView<Eigen::Lower>() += g * z.transpose();
    }
    g_mean /= opts.mc_samples;
    g_factor /= opts.mc_samples;
    for (int i = 0; i < d; ++i) {
      g_factor(i, i) = (g_factor(i, i) + 1.0 / factor(i, i)) * logistic(raw(i));
    }
    const double elbo =
        lp_sum / opts.mc_samples + factor.diagonal().array().log().sum() + entropy_const;
    if (!std::isfinite(elbo)) {
      throw StepSizeError("ELBO is NaN at iteration " + std::to_string(t));
    }
    diag.elbo_trace.push_back(elbo);

    const double w = t == 1 ? 1.0 : opts.rms_weight;
    acc_mean = w * g_mean.cwiseAbs2() + (1.0 - w) * acc_mean;
    acc_factor = w * g_factor.cwiseAbs2() + (1.0 - w) * acc_factor;
    const double rate = opts.step_size / std::sqrt(static_cast<double>(t));
    mean.array() += rate * g_mean.array() / (1.0 + acc_mean.array().sqrt());
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < i; ++j) {
        factor(i, j) += rate * g_factor(i, j) / (1.0 + std::sqrt(acc_factor(i, j)));
      }
      raw(i) += rate * g_factor(i, i) / (1.0 + std::sqrt(acc_factor(i, i)));
      factor(i, i) = softplus(raw(i));
    }
    if (t >= avg_start) {
      avg_mean += mean;
      avg_factor += factor.triangularView<Eigen::Lower>().toDenseMatrix();
      ++n_avg;
    }
  }
  mean = avg_mean / n_avg;
  Matrix lower = avg_factor / n_avg;
  SymmetricApproximation out(ApproxKind::gvb,
                             GaussianApproximation(mean, lower * lower.transpose()));
  diag.iterations = opts.iterations;
  out.diagnostics = std::move(diag);
  return out;
}

// ---------------------------------------------------------------------------
// Expectation propagation

TiltedMoments tilted_moments(Family family, double y, double cavity_mean, double cavity_var,
                             int quadrature_points) {
  if (!(cavity_var > 0.0)) throw std::invalid_argument("cavity variance must be positive");
  if (family == Family::gaussian_identity) {
    const double v = 1.0 / (1.0 / cavity_var + 1.0);
    return {v * (cavity_mean / cavity_var + y), v};
  }
  if (family == Family::bernoulli_probit) {
    const double t = y > 0.5 ? 1.0 : -1.0;
    const double denom = std::sqrt(1.0 + cavity_var);
    const double z = t * cavity_mean / denom;
    const double lam = inverse_mills(z);
    const double mean = cavity_mean + t * cavity_var * lam / denom;
    const double var = cavity_var - cavity_var * cavity_var * lam * (z + lam) / (1.0 + cavity_var);
    return {mean, var};
  }
  // Adaptive Gauss-Hermite: rule centred at the tilted mode, scaled by its
  // Laplace curvature.
  auto logt = [&](double eta) {
    const double r = eta - cavity_mean;
    return family_log_density_derivative(family, y, eta, 0) - 0.5 * r * r / cavity_var;
  };
  auto d1 = [&](double eta) {
    return family_log_density_derivative(family, y, eta, 1) - (eta - cavity_mean) / cavity_var;
  };
  auto d2 = [&](double eta) {
    return family_log_density_derivative(family, y, eta, 2) - 1.0 / cavity_var;
  };
  double eta = cavity_mean;
  double cur = logt(eta);
  for (int it = 0; it < 200; ++it) {
    const double step = -d1(eta) / d2(eta);
    double s = 1.0;
    double cand = eta + step;
    double val = logt(cand);
    while (!(std::isfinite(val) && val >= cur - 1e-12 * std::abs(cur)) && s > 1e-12) {
      s *= 0.5;
      cand = eta + s * step;
      val = logt(cand);
    }
    const double moved = cand - eta;
    eta = cand;
    cur = val;
    if (std::abs(moved) <= 1e-13 * (1.0 + std::abs(eta))) break;
  }
  const double scale = std::sqrt(-1.0 / d2(eta));
  const auto& rule = gauss_hermite(quadrature_points);
  double z0 = 0.0, z1 = 0.0, z2 = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double x = rule.nodes[k];
    const double off = std::sqrt(2.0) * scale * x;
    const double w = rule.weights[k] * std::exp(logt(eta + off) - cur + x * x);
    z0 += w;
    z1 += w * off;
    z2 += w * off * off;
  }
  const double m_off = z1 / z0;
  return {eta + m_off, z2 / z0 - m_off * m_off};
}

GaussianApproximation ep_global_from_sites(const GlmModel& model, const Vector& precisions,
                                           const Vector& shifts) {
  const Matrix& x = model.design();
  Matrix q = x.transpose() * precisions.asDiagonal() * x;
  q.diagonal() += model.prior_var().cwiseInverse();
  const Vector r = x.transpose() * shifts +
                   (model.prior_mean().array() / model.prior_var().array()).matrix();
  Eigen::LLT<Matrix> llt(q);
  if (llt.info() != Eigen::Success) throw IndefiniteCurvatureError("EP precision not SPD");
  const Matrix cov = llt.solve(Matrix::Identity(q.rows(), q.cols()));
  return GaussianApproximation(cov * r, cov);
}

EpResult fit_gep_sites(const GlmModel& model, const EpOptions& opts) {
  const int n = model.n_obs();
  const Matrix& x = model.design();
  const Vector& y = model.response();

  Vector tau = Vector::Zero(n);
  Vector nu = Vector::Zero(n);
  Matrix cov = model.prior_var().asDiagonal();
  Vector r = (model.prior_mean().array() / model.prior_var().array()).matrix();
  Vector mean = cov * r;

  FitDiagnostics diag;
  bool converged = false;
  int sweep = 0;
  for (; sweep < opts.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vector xi = x.row(i).transpose();
      const Vector sx = cov * xi;
      const double v = xi.dot(sx);
      const double m = xi.dot(mean);
      const double cav_prec = 1.0 / v - tau(i);
      if (!(cav_prec > 0.0)) {
        ++diag.skipped_sites;
        continue;
      }
      const double cav_var = 1.0 / cav_prec;
      const double cav_mean = cav_var * (m / v - nu(i));
      const auto tm = tilted_moments(model.family(), y(i), cav_mean, cav_var,
                                     opts.quadrature_points);
      double tau_full = 1.0 / tm.var - cav_prec;
      double nu_full = tm.mean / tm.var - cav_mean / cav_var;
      if (tau_full < 0.0) {
        tau_full = 0.0;
        nu_full = 0.0;
        ++diag.clipped_sites;
      }
      const double tau_new = opts.damping * tau(i) + (1.0 - opts.damping) * tau_full;
      const double nu_new = opts.damping * nu(i) + (1.0 - opts.damping) * nu_full;
      const double dtau = tau_new - tau(i);
      const double dnu = nu_new - nu(i);
      max_change = std::max({max_change, std::abs(dtau) / (1.0 + std::abs(tau(i))),
                             std::abs(dnu) / (1.0 + std::abs(nu(i)))});
      tau(i) = tau_new;
      nu(i) = nu_new;
      // Sherman-Morrison for Q += dtau x x'.
      cov -= (dtau / (1.0 + dtau * v)) * sx * sx.transpose();
      r += dnu * xi;
      mean = cov * r;
    }
    if (!cov.allFinite() || !mean.allFinite()) {
      throw NonConvergenceError("EP state became non-finite", mean, cov);
    }
    if (max_change < opts.tol) {
      converged = true;
      ++sweep;
      break;
    }
  }
  if (!converged) {
    throw NonConvergenceError("EP did not converge in " + std::to_string(opts.max_sweeps) +
                                  " sweeps",
                              mean, cov);
  }
  diag.iterations = sweep;
  EpSiteSet sites{tau, nu, mean, cov};
  SymmetricApproximation approx(ApproxKind::gep, GaussianApproximation(mean, cov));
  approx.diagnostics = diag;
  return EpResult{std::move(sites), std::move(approx)};
}

SymmetricApproximation fit_gep(const GlmModel& model, const EpOptions& opts) {
  return fit_gep_sites(model, opts).approximation;
}

// ---------------------------------------------------------------------------
// SNP builder

SymmetricApproximation build_snp(const ModelSpec& model, const SymmetricApproximation& laplace) {
  if (!laplace.gaussian()) throw std::invalid_argument("SNP needs a Gaussian base");
  if (model.dim > 2) throw UnsupportedError("SNP approximation is limited to d <= 2");
  if (!model.deriv3 || !model.deriv4) {
    throw UnsupportedError("SNP needs analytic third and fourth derivative tensors");
  }
  const Vector& mode = laplace.center();
  return SymmetricApproximation(SnpApproximation(mode, laplace.gaussian()->covariance(),
                                                 model.deriv3(mode), model.deriv4(mode)));
}

}  // namespace skewfit
