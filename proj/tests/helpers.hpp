#pragma once

#include <random>
#include <string>

#include "skewfit/model.hpp"
#include "skewfit/symmetric.hpp"

namespace testutil {

using skewfit::Family;
using skewfit::GlmModel;
using skewfit::Matrix;
using skewfit::Vector;

// Standard normal design, responses drawn from the family at `truth`.
inline GlmModel random_glm(Family family, int n, const Vector& truth, std::uint64_t seed,
                           double prior_var = 4.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int d = static_cast<int>(truth.size());
  Matrix x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = z(rng);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    const double eta = x.row(i).dot(truth);
    switch (family) {
      case Family::poisson_log: {
        std::poisson_distribution<int> p(std::exp(eta));
        y(i) = p(rng);
        break;
      }
      case Family::bernoulli_logit:
        y(i) = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
        break;
      case Family::bernoulli_probit:
        y(i) = u(rng) < 0.5 * std::erfc(-eta / std::sqrt(2.0)) ? 1.0 : 0.0;
        break;
      case Family::gaussian_identity:
        y(i) = eta + z(rng);
        break;
    }
  }
  return GlmModel(x, y, family, Vector::Zero(d), Vector::Constant(d, prior_var));
}

inline std::string source_path(const std::string& rel) {
  return std::string(SKEWFIT_SOURCE_DIR) + "/" + rel;
}

}  // namespace testutil
