#include "skewfit/skew.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "skewfit/special.hpp"

namespace skewfit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr char kMagic[4] = {'S', 'K', 'W', 'S'};
constexpr std::uint32_t kBinaryVersion = 1;
}  // namespace

Vector mirror(const Vector& theta, const Vector& center) {
  if (theta.size() != center.size()) throw std::invalid_argument("mirror: dimension mismatch");
  return 2.0 * center - theta;
}

std::uint64_t fingerprint(const Vector& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    const double x = v(i);
    std::memcpy(&bits, &x, sizeof bits);
    h = mix_seed(h ^ bits);
  }
  return h;
}

SkewnessFactor::SkewnessFactor(ModelSpec model, Vector center)
    : model_(std::move(model)), center_(std::move(center)) {
  if (center_.size() != model_.dim) throw std::invalid_argument("center has wrong dimension");
  center_fingerprint_ = fingerprint(center_);
}

SkewnessFactor::SkewnessFactor(const GlmModel& glm, Vector center)
    : SkewnessFactor(glm.spec(), std::move(center)) {
  glm_ = glm;
  eta_center_ = glm.design() * center_;
}

const Vector& SkewnessFactor::precomputed_eta() const {
  if (!glm_) throw StateError("no linear predictor was precomputed for this factor");
  return eta_center_;
}

double SkewnessFactor::log_ratio(const Vector& theta) const {
  const double a = log_unnorm_posterior(model_, theta);
  const double b = log_unnorm_posterior(model_, mirror(theta, center_));
  if (std::isnan(a) || std::isnan(b)) throw EvaluationError("log-posterior evaluated to NaN");
  return a - b;  // NaN iff both are -inf
}

double SkewnessFactor::log_ratio_fast(const Vector& theta) const {
  if (!glm_) throw StateError("fast factor needs a precomputed linear predictor");
  if (fingerprint(center_) != center_fingerprint_) {
    throw StateError("precomputed linear predictor is stale");
  }
  if (theta.size() != center_.size()) throw std::invalid_argument("dimension mismatch");
  const Vector delta = glm_->design() * (theta - center_);
  double lik_plus = 0.0;
  double lik_minus = 0.0;
  for (int i = 0; i < glm_->n_obs(); ++i) {
    lik_plus += glm_->obs_log_density(i, eta_center_(i) + delta(i));
    lik_minus += glm_->obs_log_density(i, eta_center_(i) - delta(i));
  }
  const double prior = glm_->log_prior_difference(theta, mirror(theta, center_));
  const double out = prior + (lik_plus - lik_minus);
  if (std::isnan(out) && !(lik_plus == -kInf && lik_minus == -kInf)) {
    throw EvaluationError("log-likelihood evaluated to NaN");
  }
  return out;
}

double factor_from_log_ratio(double delta) {
  if (std::isnan(delta)) return 0.5;
  return logistic(delta);
}

double skew_factor(const SkewnessFactor& f, const Vector& theta) {
  return factor_from_log_ratio(f.log_ratio(theta));
}

double skew_factor_fast(const SkewnessFactor& f, const GlmModel& model, const Vector& theta) {
  if (!f.glm_) throw StateError("fast factor needs a precomputed linear predictor");
  if (f.glm_->identity() != model.identity()) {
    throw StateError("factor was precomputed for a different model");
  }
  return factor_from_log_ratio(f.log_ratio_fast(theta));
}

PredictorOpCount predictor_op_count(int n_obs, int dim) {
  const auto n = static_cast<std::uint64_t>(n_obs);
  const auto d = static_cast<std::uint64_t>(dim);
  PredictorOpCount c;
  // mirror (2d) + two products of 2nd flops each.
  c.naive = 2 * d + 2 * (2 * n * d);
  // theta - center (d) + one product + eta_center +/- delta (2n).
  c.fast = d + 2 * n * d + 2 * n;
  return c;
}

// ---------------------------------------------------------------------------

SkewSymmetricApproximation::SkewSymmetricApproximation(SymmetricApproximation symmetric,
                                                       SkewnessFactor factor)
    : symmetric_(std::move(symmetric)), factor_(std::move(factor)) {
  if ((symmetric_.center() - factor_.center()).cwiseAbs().maxCoeff() != 0.0) {
    throw std::invalid_argument("factor and symmetric density have different centers");
  }
}

double SkewSymmetricApproximation::weight(const Vector& theta) const {
  if (factor_.has_linear_predictor()) return factor_from_log_ratio(factor_.log_ratio_fast(theta));
  return factor_from_log_ratio(factor_.log_ratio(theta));
}

SkewSymmetricApproximation make_skew(const SymmetricApproximation& base, const ModelSpec& model) {
  return SkewSymmetricApproximation(base, SkewnessFactor(model, base.center()));
}

SkewSymmetricApproximation make_skew(const SymmetricApproximation& base, const GlmModel& model) {
  return SkewSymmetricApproximation(base, SkewnessFactor(model, base.center()));
}

double skew_logpdf(const SkewSymmetricApproximation& q, const Vector& theta) {
  if (theta.size() != q.dim()) throw std::invalid_argument("dimension mismatch");
  const double lf = q.symmetric().log_pdf(theta);
  if (lf == -kInf) return -kInf;
  const double w = q.weight(theta);
  if (w == 0.0) return -kInf;
  return kLog2 + lf + std::log(w);
}

std::vector<Vector> sample_skew(const SkewSymmetricApproximation& q, int n_samples, Rng& rng,
                                SamplerTrace* trace) {
  if (n_samples < 0) throw std::invalid_argument("negative sample count");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    Vector proposal = q.symmetric().draw(rng);
    const double u = unif(rng);
    const double w = q.weight(proposal);
    const bool keep = u < w;
    if (trace) {
      trace->proposals.push_back(proposal);
      trace->weights.push_back(w);
      trace->uniforms.push_back(u);
      trace->kept.push_back(keep);
    }
    out.push_back(keep ? std::move(proposal) : mirror(proposal, q.center()));
  }
  return out;
}

Matrix stack_samples(const std::vector<Vector>& samples) {
  if (samples.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(samples.size()), samples.front().size());
  for (std::size_t i = 0; i < samples.size(); ++i) m.row(i) = samples[i].transpose();
  return m;
}

// ---------------------------------------------------------------------------
// Sample I/O

void write_samples_csv(const std::string& path, const Matrix& samples,
                       const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    if (j) out << ',';
    out << (j < static_cast<Eigen::Index>(names.size()) ? names[j]
                                                         : "theta" + std::to_string(j + 1));
  }
  out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      if (j) out << ',';
      out << samples(i, j);
    }
    out << '\n';
  }
}

Matrix read_samples_csv(const std::string& path, std::vector<std::string>* names) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    ++rows;
  }
  const auto d = header.size();
  if (values.size() != rows * d) throw std::runtime_error("ragged sample CSV '" + path + "'");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = values[i * d + j];
  if (names) *names = header;
  return m;
}

void write_samples_binary(const std::string& path, const Matrix& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const auto n = static_cast<std::uint32_t>(samples.rows());
  const auto d = static_cast<std::uint32_t>(samples.cols());
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kBinaryVersion), 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  out.write(reinterpret_cast<const char*>(samples.data()),
            static_cast<std::streamsize>(sizeof(double) * samples.size()));
}

Matrix read_samples_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  char magic[4];
  std::uint32_t version = 0, n = 0, d = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&d), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("'" + path + "' is not a sample container");
  }
  if (version != kBinaryVersion) {
    throw std::runtime_error("unsupported sample container version " + std::to_string(version));
  }
  Matrix m(n, d);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw std::runtime_error("truncated sample container '" + path + "'");
  return m;
}

}  // namespace skewfit
