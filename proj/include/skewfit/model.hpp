#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "skewfit/errors.hpp"

namespace skewfit {

/// Dense symmetric derivative array of order k in dimension d, stored
/// row-major as d^k entries.
struct DerivativeTensor {
  int dim = 0;
  int order = 0;
  std::vector<double> data;

  DerivativeTensor() = default;
  DerivativeTensor(int d, int k);

  double& at(std::initializer_list<int> idx);
  double at(std::initializer_list<int> idx) const;
  std::size_t flat_index(std::initializer_list<int> idx) const;

  /// <T, h^{(x) k}>: full contraction with k copies of h.
  double contract(const Vector& h) const;
};

using LogDensityFn = std::function<double(const Vector&)>;

/// A target posterior known up to its normalizing constant.
///
/// `grad`, `hess`, `deriv3` and `deriv4` are derivatives of the full
/// log-posterior log pi(theta) + l(theta); any of them may be empty, in
/// which case finite differences are used where that is affordable.
struct ModelSpec {
  int dim = 0;
  LogDensityFn log_prior;
  LogDensityFn log_lik;
  std::function<bool(const Vector&)> in_support;  // empty: all of R^d
  std::function<Vector(const Vector&)> grad;
  std::function<Matrix(const Vector&)> hess;
  std::function<DerivativeTensor(const Vector&)> deriv3;
  std::function<DerivativeTensor(const Vector&)> deriv4;
  std::vector<std::string> names;
};

enum class Family { poisson_log, bernoulli_logit, bernoulli_probit, gaussian_identity };

std::string to_string(Family f);
/// Accepts the canonical names and the short forms poisson, logistic, probit, gaussian.
Family family_from_string(const std::string& name);

/// k-th derivative in eta of the per-observation log density g(y, eta);
/// k = 0 returns g itself. Probit supports k <= 2 only.
double family_log_density_derivative(Family f, double y, double eta, int k);

/// Inverse link: E(y | eta).
double family_mean(Family f, double eta);

struct Dataset {
  Matrix predictors;
  Vector responses;
  std::vector<std::string> column_names;
};

/// Reads a CSV with a header row. `response_column` names the response; all
/// other columns become predictors. With `add_intercept` a leading column of
/// ones named "(Intercept)" is prepended.
Dataset read_csv_dataset(const std::string& path, const std::string& response_column,
                         bool add_intercept);

/// GLM with independent Gaussian priors. Gaussian-identity uses unit noise
/// variance.
class GlmModel {
 public:
  GlmModel(Matrix design, Vector response, Family family, Vector prior_mean,
           Vector prior_var, std::vector<std::string> names = {});
  GlmModel(const Dataset& data, Family family, double prior_mean, double prior_var);

  int dim() const { return static_cast<int>(data_->design.cols()); }
  int n_obs() const { return static_cast<int>(data_->design.rows()); }
  Family family() const { return data_->family; }
  const Matrix& design() const { return data_->design; }
  const Vector& response() const { return data_->response; }
  const Vector& prior_mean() const { return data_->prior_mean; }
  const Vector& prior_var() const { return data_->prior_var; }
  const std::vector<std::string>& names() const { return data_->names; }

  /// Identity of the underlying data, stable across copies of this model.
  const void* identity() const { return data_.get(); }

  double log_prior(const Vector& theta) const;
  /// log pi(a) - log pi(b), evaluated without forming either term.
  double log_prior_difference(const Vector& a, const Vector& b) const;
  double log_lik(const Vector& theta) const;
  double log_lik_from_eta(const Vector& eta) const;
  double obs_log_density(int i, double eta) const;

  Vector gradient(const Vector& theta) const;
  Matrix hessian(const Vector& theta) const;
  /// Order 3 or 4 log-posterior derivative; canonical links only.
  DerivativeTensor higher_derivative(const Vector& theta, int order) const;

  /// Per-observation E(y_i | theta).
  Vector mean_response(const Vector& theta) const;

  ModelSpec spec() const;

 private:
  struct Data {
    Matrix design;
    Vector response;
    Family family;
    Vector prior_mean;
    Vector prior_var;
    std::vector<std::string> names;
  };
  std::shared_ptr<const Data> data_;
};

/// log pi(theta) + l(theta); -inf off support.
double log_unnorm_posterior(const ModelSpec& model, const Vector& theta);

/// Derivative tensor of order 1..4 of the log-posterior. Orders 1 and 2
/// fall back to central differences; orders 3 and 4 do so only for d <= 2.
DerivativeTensor posterior_derivatives(const ModelSpec& model, const Vector& theta,
                                       int order);

/// Central-difference helpers with the library's default steps.
Vector fd_gradient(const ModelSpec& model, const Vector& theta);
Matrix fd_hessian(const ModelSpec& model, const Vector& theta);

Vector mu_functional(const GlmModel& model, const Vector& theta);

}  // namespace skewfit
