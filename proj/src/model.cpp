#include "skewfit/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "skewfit/special.hpp"

namespace skewfit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dim(const ModelSpec& model, const Vector& theta) {
  if (theta.size() != model.dim) {
    throw std::invalid_argument("parameter has dimension " + std::to_string(theta.size()) +
                                ", model expects " + std::to_string(model.dim));
  }
}

std::size_t ipow(int base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= static_cast<std::size_t>(base);
  return r;
}
}  // namespace

// ---------------------------------------------------------------------------
// DerivativeTensor

DerivativeTensor::DerivativeTensor(int d, int k) : dim(d), order(k), data(ipow(d, k), 0.0) {}

std::size_t DerivativeTensor::flat_index(std::initializer_list<int> idx) const {
  std::size_t flat = 0;
  for (int i : idx) flat = flat * static_cast<std::size_t>(dim) + static_cast<std::size_t>(i);
  return flat;
}

double& DerivativeTensor::at(std::initializer_list<int> idx) { return data[flat_index(idx)]; }
double DerivativeTensor::at(std::initializer_list<int> idx) const {
  return data[flat_index(idx)];
}

double DerivativeTensor::contract(const Vector& h) const {
  // Contract the last index repeatedly: d^k -> d^(k-1) -> ... -> scalar.
  std::vector<double> cur = data;
  for (int level = order; level > 0; --level) {
    std::vector<double> next(cur.size() / dim, 0.0);
    for (std::size_t j = 0; j < next.size(); ++j) {
      double s = 0.0;
      for (int i = 0; i < dim; ++i) s += cur[j * dim + i] * h(i);
      next[j] = s;
    }
    cur.swap(next);
  }
  return cur[0];
}

// ---------------------------------------------------------------------------
// Families

std::string to_string(Family f) {
  switch (f) {
    case Family::poisson_log: return "poisson-log";
    case Family::bernoulli_logit: return "bernoulli-logit";
    case Family::bernoulli_probit: return "bernoulli-probit";
    case Family::gaussian_identity: return "gaussian-identity";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  if (name == "poisson-log" || name == "poisson") return Family::poisson_log;
  if (name == "bernoulli-logit" || name == "logistic") return Family::bernoulli_logit;
  if (name == "bernoulli-probit" || name == "probit") return Family::bernoulli_probit;
  if (name == "gaussian-identity" || name == "gaussian") return Family::gaussian_identity;
  throw ConfigError("unknown family '" + name + "'");
}

double family_log_density_derivative(Family f, double y, double eta, int k) {
  switch (f) {
    case Family::poisson_log: {
      const double mu = std::exp(eta);
      if (k == 0) return y * eta - mu - std::lgamma(y + 1.0);
      if (k == 1) return y - mu;
      return -mu;
    }
    case Family::bernoulli_logit: {
      if (k == 0) return y * eta + log_logistic(-eta);
      const double s = logistic(eta);
      switch (k) {
        case 1: return y - s;
        case 2: return -s * (1 - s);
        case 3: return -s * (1 - s) * (1 - 2 * s);
        default: return -s * (1 - s) * (1 - 6 * s + 6 * s * s);
      }
    }
    case Family::bernoulli_probit: {
      const double t = y > 0.5 ? 1.0 : -1.0;
      if (k == 0) return log_normal_cdf(t * eta);
      const double lam = inverse_mills(t * eta);
      if (k == 1) return t * lam;
      if (k == 2) return -lam * (t * eta + lam);
      throw UnsupportedError("probit link: derivatives above order 2 are not implemented");
    }
    case Family::gaussian_identity: {
      if (k == 0) return -0.5 * (y - eta) * (y - eta) - 0.5 * kLog2Pi;
      if (k == 1) return y - eta;
      if (k == 2) return -1.0;
      return 0.0;
    }
  }
  return 0.0;
}

double family_mean(Family f, double eta) {
  switch (f) {
    case Family::poisson_log: return std::exp(eta);
    case Family::bernoulli_logit: return logistic(eta);
    case Family::bernoulli_probit: return normal_cdf(eta);
    case Family::gaussian_identity: return eta;
  }
  return eta;
}

// ---------------------------------------------------------------------------
// Dataset

namespace {
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}
}  // namespace

Dataset read_csv_dataset(const std::string& path, const std::string& response_column,
                         bool add_intercept) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset '" + path + "' is empty");
  const auto header = split_csv_line(line);
  int response_idx = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == response_column) response_idx = static_cast<int>(j);
  }
  if (response_idx < 0) {
    throw ConfigError("response column '" + response_column + "' not found in '" + path + "'");
  }

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      if (c.empty() || c == "NA") {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": missing value");
      }
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != c.size()) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": non-numeric value '" + c +
                          "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("dataset '" + path + "' has no rows");

  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(header.size()) - 1 + (add_intercept ? 1 : 0);
  Dataset ds;
  ds.predictors.resize(n, p);
  ds.responses.resize(n);
  if (add_intercept) ds.column_names.push_back("(Intercept)");
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (static_cast<int>(j) != response_idx) ds.column_names.push_back(header[j]);
  }
  for (int i = 0; i < n; ++i) {
    int col = 0;
    if (add_intercept) ds.predictors(i, col++) = 1.0;
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (static_cast<int>(j) == response_idx) {
        ds.responses(i) = rows[i][j];
      } else {
        ds.predictors(i, col++) = rows[i][j];
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// GlmModel

GlmModel::GlmModel(Matrix design, Vector response, Family family, Vector prior_mean,
                   Vector prior_var, std::vector<std::string> names) {
  if (design.rows() != response.size()) {
    throw std::invalid_argument("design rows and response length differ");
  }
  if (prior_mean.size() != design.cols() || prior_var.size() != design.cols()) {
    throw std::invalid_argument("prior dimension does not match design columns");
  }
  if ((prior_var.array() <= 0.0).any()) {
    throw std::invalid_argument("prior variances must be positive");
  }
  if (design.rows() < 1 || design.cols() < 1) {
    throw std::invalid_argument("GLM needs at least one observation and one parameter");
  }
  if (names.empty()) {
    for (int j = 0; j < design.cols(); ++j) names.push_back("theta" + std::to_string(j + 1));
  }
  data_ = std::make_shared<const Data>(Data{std::move(design), std::move(response), family,
                                            std::move(prior_mean), std::move(prior_var),
                                            std::move(names)});
}

GlmModel::GlmModel(const Dataset& data, Family family, double prior_mean, double prior_var)
    : GlmModel(data.predictors, data.responses, family,
               Vector::Constant(data.predictors.cols(), prior_mean),
               Vector::Constant(data.predictors.cols(), prior_var), data.column_names) {}

double GlmModel::log_prior(const Vector& theta) const {
  const auto& d = *data_;
  const Vector z = theta - d.prior_mean;
  return -0.5 * (z.array().square() / d.prior_var.array()).sum() -
         0.5 * (d.prior_var.array().log().sum() + dim() * kLog2Pi);
}

double GlmModel::log_prior_difference(const Vector& a, const Vector& b) const {
  const auto& d = *data_;
  // (b-m)^2 - (a-m)^2 = (b-a)(a+b-2m)
  const Vector diff = (b - a).cwiseProduct(a + b - 2.0 * d.prior_mean);
  return 0.5 * (diff.array() / d.prior_var.array()).sum();
}

double GlmModel::obs_log_density(int i, double eta) const {
  return family_log_density_derivative(data_->family, data_->response(i), eta, 0);
}

double GlmModel::log_lik_from_eta(const Vector& eta) const {
  double s = 0.0;
  for (int i = 0; i < n_obs(); ++i) s += obs_log_density(i, eta(i));
  return s;
}

double GlmModel::log_lik(const Vector& theta) const {
  return log_lik_from_eta(data_->design * theta);
}

Vector GlmModel::gradient(const Vector& theta) const {
  const auto& d = *data_;
  const Vector eta = d.design * theta;
  Vector g1(n_obs());
  for (int i = 0; i < n_obs(); ++i) {
    g1(i) = family_log_density_derivative(d.family, d.response(i), eta(i), 1);
  }
  return d.design.transpose() * g1 -
         ((theta - d.prior_mean).array() / d.prior_var.array()).matrix();
}

Matrix GlmModel::hessian(const Vector& theta) const {
  const auto& d = *data_;
  const Vector eta = d.design * theta;
  Vector g2(n_obs());
  for (int i = 0; i < n_obs(); ++i) {
    g2(i) = family_log_density_derivative(d.family, d.response(i), eta(i), 2);
  }
  Matrix h = d.design.transpose() * g2.asDiagonal() * d.design;
  h.diagonal() -= d.prior_var.cwiseInverse();
  return h;
}

DerivativeTensor GlmModel::higher_derivative(const Vector& theta, int order) const {
  if (order != 3 && order != 4) throw std::invalid_argument("order must be 3 or 4");
  const auto& d = *data_;
  if (d.family == Family::bernoulli_probit) {
    throw UnsupportedError("higher-order derivatives need a canonical link");
  }
  const int p = dim();
  DerivativeTensor t(p, order);
  const Vector eta = d.design * theta;
  // Sum_i b^(k)(eta_i) x_i^{(x)k}; Gaussian priors contribute nothing.
  std::vector<double> outer;
  for (int i = 0; i < n_obs(); ++i) {
    const double w = family_log_density_derivative(d.family, d.response(i), eta(i), order);
    if (w == 0.0) continue;
    outer.assign(1, w);
    for (int level = 0; level < order; ++level) {
      std::vector<double> next(outer.size() * p);
      for (std::size_t a = 0; a < outer.size(); ++a) {
        for (int j = 0; j < p; ++j) next[a * p + j] = outer[a] * d.design(i, j);
      }
      outer.swap(next);
    }
    for (std::size_t a = 0; a < outer.size(); ++a) t.data[a] += outer[a];
  }
  return t;
}

Vector GlmModel::mean_response(const Vector& theta) const {
  const Vector eta = data_->design * theta;
  Vector mu(n_obs());
  for (int i = 0; i < n_obs(); ++i) mu(i) = family_mean(data_->family, eta(i));
  return mu;
}

ModelSpec GlmModel::spec() const {
  ModelSpec s;
  s.dim = dim();
  GlmModel self = *this;
  s.log_prior = [self](const Vector& t) { return self.log_prior(t); };
  s.log_lik = [self](const Vector& t) { return self.log_lik(t); };
  s.grad = [self](const Vector& t) { return self.gradient(t); };
  s.hess = [self](const Vector& t) { return self.hessian(t); };
  if (family() != Family::bernoulli_probit) {
    s.deriv3 = [self](const Vector& t) { return self.higher_derivative(t, 3); };
    s.deriv4 = [self](const Vector& t) { return self.higher_derivative(t, 4); };
  }
  s.names = names();
  return s;
}

Vector mu_functional(const GlmModel& model, const Vector& theta) {
  if (theta.size() != model.dim()) throw std::invalid_argument("dimension mismatch");
  return model.mean_response(theta);
}

// ---------------------------------------------------------------------------
// Posterior evaluation

double log_unnorm_posterior(const ModelSpec& model, const Vector& theta) {
  check_dim(model, theta);
  if (model.in_support && !model.in_support(theta)) return -kInf;
  const double lp = model.log_prior(theta);
  if (lp == -kInf) return -kInf;
  return lp + model.log_lik(theta);
}

Vector fd_gradient(const ModelSpec& model, const Vector& theta) {
  Vector g(model.dim);
  Vector x = theta;
  for (int j = 0; j < model.dim; ++j) {
    const double h = 1e-5 * (1.0 + std::abs(theta(j)));
    x(j) = theta(j) + h;
    const double fp = log_unnorm_posterior(model, x);
    x(j) = theta(j) - h;
    const double fm = log_unnorm_posterior(model, x);
    x(j) = theta(j);
    g(j) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Matrix fd_hessian(const ModelSpec& model, const Vector& theta) {
  const int d = model.dim;
  Matrix hess(d, d);
  Vector step(d);
  for (int j = 0; j < d; ++j) step(j) = 1e-4 * (1.0 + std::abs(theta(j)));
  const double f0 = log_unnorm_posterior(model, theta);
  Vector x = theta;
  for (int j = 0; j < d; ++j) {
    x(j) = theta(j) + step(j);
    const double fp = log_unnorm_posterior(model, x);
    x(j) = theta(j) - step(j);
    const double fm = log_unnorm_posterior(model, x);
    x(j) = theta(j);
    hess(j, j) = (fp - 2.0 * f0 + fm) / (step(j) * step(j));
    for (int k = 0; k < j; ++k) {
      auto eval = [&](double sj, double sk) {
        Vector y = theta;
        y(j) += sj * step(j);
        y(k) += sk * step(k);
        return log_unnorm_posterior(model, y);
      };
      const double v =
          (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * step(j) * step(k));
      hess(j, k) = hess(k, j) = v;
    }
  }
  return hess;
}

namespace {
Matrix hessian_of(const ModelSpec& model, const Vector& theta) {
  return model.hess ? model.hess(theta) : fd_hessian(model, theta);
}

// Central difference of the order-(k-1) tensor, for d <= 2 only.
DerivativeTensor fd_higher(const ModelSpec& model, const Vector& theta, int order) {
  const int d = model.dim;
  auto lower = [&](const Vector& x) -> DerivativeTensor {
    if (order - 1 == 3) {
      return model.deriv3 ? model.deriv3(x) : fd_higher(model, x, 3);
    }
    DerivativeTensor t(d, 2);
    const Matrix h = hessian_of(model, x);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) t.at({i, j}) = h(i, j);
    return t;
  };
  DerivativeTensor out(d, order);
  const std::size_t block = out.data.size() / d;
  for (int j = 0; j < d; ++j) {
    const double h = 1e-3 * (1.0 + std::abs(theta(j)));
    Vector xp = theta, xm = theta;
    xp(j) += h;
    xm(j) -= h;
    const auto tp = lower(xp);
    const auto tm = lower(xm);
    // Place the new index last; symmetry is restored below.
    for (std::size_t a = 0; a < block; ++a) {
      out.data[a * d + j] = (tp.data[a] - tm.data[a]) / (2.0 * h);
    }
  }
  // Symmetrize by averaging over the d^k index permutations' orbits: for
  // d <= 2 an entry depends only on how many indices equal 1.
  std::vector<double> sum(order + 1, 0.0);
  std::vector<int> count(order + 1, 0);
  for (std::size_t a = 0; a < out.data.size(); ++a) {
    int ones = 0;
    std::size_t r = a;
    for (int l = 0; l < order; ++l) {
      ones += static_cast<int>(r % d);
      r /= d;
    }
    sum[ones] += out.data[a];
    ++count[ones];
  }
  for (std::size_t a = 0; a < out.data.size(); ++a) {
    int ones = 0;
    std::size_t r = a;
    for (int l = 0; l < order; ++l) {
      ones += static_cast<int>(r % d);
      r /= d;
    }
    out.data[a] = sum[ones] / count[ones];
  }
  return out;
}
}  // namespace

DerivativeTensor posterior_derivatives(const ModelSpec& model, const Vector& theta,
                                       int order) {
  check_dim(model, theta);
  const int d = model.dim;
  switch (order) {
    case 1: {
      const Vector g = model.grad ? model.grad(theta) : fd_gradient(model, theta);
      DerivativeTensor t(d, 1);
      for (int i = 0; i < d; ++i) t.data[i] = g(i);
      return t;
    }
    case 2: {
      const Matrix h = hessian_of(model, theta);
      DerivativeTensor t(d, 2);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) t.at({i, j}) = 0.5 * (h(i, j) + h(j, i));
      return t;
    }
    case 3:
    case 4: {
      const auto& analytic = order == 3 ? model.deriv3 : model.deriv4;
      if (analytic) return analytic(theta);
      if (d > 2) {
        throw UnsupportedError("order-" + std::to_string(order) +
                               " derivatives need an analytic evaluator when d > 2");
      }
      return fd_higher(model, theta, order);
    }
    default:
      throw std::invalid_argument("derivative order must be in 1..4");
  }
}

}  // namespace skewfit
