#include "skewfit/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "skewfit/parallel.hpp"
#include "skewfit/special.hpp"

namespace skewfit {

namespace {
using ChainRng = std::mt19937_64;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vector gradient_of(const ModelSpec& model, const Vector& theta) {
  return model.grad ? model.grad(theta) : fd_gradient(model, theta);
}

// Welford accumulator for per-coordinate mean and covariance.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(int d) : mean_(Vector::Zero(d)), m2_(Matrix::Zero(d, d)) {}
  void add(const Vector& x) {
    ++n_;
    const Vector delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_).transpose();
  }
  long count() const { return n_; }
  Matrix covariance() const { return n_ > 1 ? Matrix(m2_ / (n_ - 1.0)) : Matrix(m2_ * 0.0); }
  Vector variance() const { return covariance().diagonal(); }
  void reset() {
    n_ = 0;
    mean_.setZero();
    m2_.setZero();
  }

 private:
  long n_ = 0;
  Vector mean_;
  Matrix m2_;
};

// Nesterov dual averaging of log step size.
class DualAveraging {
 public:
  DualAveraging(double step, double target) : target_(target) { restart(step); }
  void restart(double step) {
    mu_ = std::log(10.0 * step);
    h_bar_ = 0.0;
    log_step_ = std::log(step);
    log_step_bar_ = 0.0;
    t_ = 0;
  }
  double update(double accept_prob) {
    ++t_;
    const double t = static_cast<double>(t_);
    const double eta = 1.0 / (t + kT0);
    h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept_prob);
    log_step_ = mu_ - std::sqrt(t) / kGamma * h_bar_;
    const double w = std::pow(t, -kKappa);
    log_step_bar_ = w * log_step_ + (1.0 - w) * log_step_bar_;
    return std::exp(log_step_);
  }
  double final_step() const { return std::exp(log_step_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double target_;
  double mu_ = 0.0, h_bar_ = 0.0, log_step_ = 0.0, log_step_bar_ = 0.0;
  long t_ = 0;
};

struct HmcState {
  Vector theta;
  double logp;
  Vector grad;
};

struct Transition {
  double accept_prob = 0.0;
  double energy_change = 0.0;
  bool divergent = false;
};

class HmcChain {
 public:
  HmcChain(const ModelSpec& model, const Vector& init, std::uint64_t seed)
      : model_(model), rng_(seed), inv_metric_(Vector::Ones(init.size())) {
    state_.theta = init;
    state_.logp = log_unnorm_posterior(model, init);
    state_.grad = gradient_of(model, init);
    if (!std::isfinite(state_.logp) || !state_.grad.allFinite()) {
      throw EvaluationError("HMC initial point has a non-finite log density or gradient");
    }
  }

  const Vector& theta() const { return state_.theta; }
  void set_inv_metric(Vector m) { inv_metric_ = std::move(m); }

  // Doubles or halves the step until one-step acceptance crosses 0.8.
  double reasonable_step(double step) {
    std::normal_distribution<double> normal(0.0, 1.0);
    auto one_step_log_accept = [&](double eps) {
      Vector p(dim());
      for (int i = 0; i < dim(); ++i) p(i) = normal(rng_) / std::sqrt(inv_metric_(i));
      const double h0 = hamiltonian(state_.logp, p);
      HmcState s = state_;
      leapfrog(s, p, eps, 1);
      const double h1 = hamiltonian(s.logp, p);
      return std::isfinite(h1) ? h0 - h1 : -std::numeric_limits<double>::infinity();
    };
    const double log_target = std::log(0.8);
    const int dir = one_step_log_accept(step) > log_target ? 1 : -1;
    for (int k = 0; k < 50; ++k) {
      const double next = dir > 0 ? 2.0 * step : 0.5 * step;
      const double la = one_step_log_accept(next);
      if ((dir > 0 && !(la > log_target)) || (dir < 0 && la > log_target)) {
        return dir > 0 ? step : next;
      }
      step = next;
    }
    return step;
  }

  Transition transition(double step, int steps) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector p(dim());
    for (int i = 0; i < dim(); ++i) p(i) = normal(rng_) / std::sqrt(inv_metric_(i));
    const double h0 = hamiltonian(state_.logp, p);
    HmcState proposal = state_;
    leapfrog(proposal, p, step, steps);
    const double h1 = hamiltonian(proposal.logp, p);
    Transition tr;
    tr.energy_change = h1 - h0;
    if (!std::isfinite(h1) || tr.energy_change > 1000.0) {
      tr.divergent = true;
      tr.accept_prob = 0.0;
      unif(rng_);
      return tr;
    }
    tr.accept_prob = std::min(1.0, std::exp(-tr.energy_change));
    if (unif(rng_) < tr.accept_prob) state_ = std::move(proposal);
    return tr;
  }

  ChainRng& rng() { return rng_; }

 private:
  int dim() const { return static_cast<int>(state_.theta.size()); }

  double hamiltonian(double logp, const Vector& p) const {
    return -logp + 0.5 * (p.array().square() * inv_metric_.array()).sum();
  }

  void leapfrog(HmcState& s, Vector& p, double eps, int steps) const {
    p += 0.5 * eps * s.grad;
    for (int l = 0; l < steps; ++l) {
      s.theta += eps * inv_metric_.cwiseProduct(p);
      s.logp = log_unnorm_posterior(model_, s.theta);
      if (!std::isfinite(s.logp)) return;
      s.grad = gradient_of(model_, s.theta);
      p += (l + 1 == steps ? 0.5 : 1.0) * eps * s.grad;
    }
  }

  const ModelSpec& model_;
  ChainRng rng_;
  HmcState state_;
  Vector inv_metric_;
};

struct ChainOutput {
  Matrix draws;
  double accept_rate = 0.0;
  int divergences = 0;
  double energy_change_sum = 0.0;
};

ChainOutput run_hmc_chain(const ModelSpec& model, const McmcConfig& cfg, const Vector& init,
                          std::uint64_t seed) {
  const int d = model.dim;
  HmcChain chain(model, init, seed);
  std::uniform_real_distribution<double> unif(0.8, 1.2);

  double step = chain.reasonable_step(0.1);
  DualAveraging da(step, cfg.target_accept);
  MomentAccumulator moments(d);
  const int half = cfg.n_warmup / 2;

  ChainOutput out;
  out.draws.resize(cfg.n_keep, d);
  double accept_sum = 0.0;
  for (int it = 0; it < cfg.n_warmup + cfg.n_keep; ++it) {
    const int steps =
        std::max(1, static_cast<int>(std::lround(cfg.hmc_leapfrog_steps * unif(chain.rng()))));
    const Transition tr = chain.transition(step, steps);
    if (it < cfg.n_warmup) {
      step = da.update(tr.accept_prob);
      // Phase 1 tunes the step under a unit metric and collects variances
      // over its second half; phase 2 re-tunes the step for the new metric.
      if (it >= half / 2 && it < half) moments.add(chain.theta());
      if (it == half - 1) {
        const double n = static_cast<double>(moments.count());
        Vector var = moments.variance();
        var = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
        chain.set_inv_metric(var);
        step = chain.reasonable_step(step);
        da.restart(step);
      }
      if (it == cfg.n_warmup - 1) step = da.final_step();
      continue;
    }
    const int k = it - cfg.n_warmup;
    out.draws.row(k) = chain.theta().transpose();
    accept_sum += tr.accept_prob;
    out.energy_change_sum += tr.energy_change;
    if (tr.divergent) ++out.divergences;
  }
  out.accept_rate = accept_sum / cfg.n_keep;
  return out;
}

ChainOutput run_rwm_chain(const ModelSpec& model, const McmcConfig& cfg, const Vector& init,
                          std::uint64_t seed) {
  const int d = model.dim;
  ChainRng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Vector theta = init;
  double logp = log_unnorm_posterior(model, theta);
  if (!std::isfinite(logp)) throw EvaluationError("RWM initial point has zero density");

  Matrix chol = Matrix::Identity(d, d);
  double log_scale = std::log(0.1);
  const double optimal = 2.38 * 2.38 / d;
  MomentAccumulator moments(d);
  const int first_window = std::max(1, cfg.n_warmup / 4);
  long warmup_accepts = 0;

  auto refresh_proposal = [&] {
    Matrix cov = optimal * moments.covariance();
    cov.diagonal().array() += 1e-10;
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() == Eigen::Success) chol = llt.matrixL();
  };

  ChainOutput out;
  out.draws.resize(cfg.n_keep, d);
  long accepts = 0;
  for (int it = 0; it < cfg.n_warmup + cfg.n_keep; ++it) {
    Vector z(d);
    for (int i = 0; i < d; ++i) z(i) = normal(rng);
    const double scale = it < first_window ? std::exp(log_scale) : 1.0;
    const Vector cand = theta + scale * (chol * z);
    const double lc = log_unnorm_posterior(model, cand);
    const double accept_prob = std::isfinite(lc) ? std::min(1.0, std::exp(lc - logp)) : 0.0;
    const bool accepted = unif(rng) < accept_prob;
    if (accepted) {
      theta = cand;
      logp = lc;
    }
    if (it < cfg.n_warmup) {
      if (accepted) ++warmup_accepts;
      moments.add(theta);
      if (it < first_window) {
        log_scale += (accept_prob - 0.234) / std::sqrt(it + 1.0);
      }
      if (it + 1 == first_window || it + 1 == cfg.n_warmup / 2 ||
          it + 1 == 3 * cfg.n_warmup / 4) {
        refresh_proposal();
        if (it + 1 != cfg.n_warmup / 2) moments.reset();
      }
      if (it + 1 == cfg.n_warmup && warmup_accepts == 0) {
        throw StuckChainError("random-walk chain accepted no proposal during warmup");
      }
      continue;
    }
    if (accepted) ++accepts;
    out.draws.row(it - cfg.n_warmup) = theta.transpose();
  }
  out.accept_rate = static_cast<double>(accepts) / cfg.n_keep;
  return out;
}

McmcResult run_chains(const ModelSpec& model, const McmcConfig& cfg, const Vector& init,
                      const char* tag,
                      ChainOutput (*runner)(const ModelSpec&, const McmcConfig&, const Vector&,
                                            std::uint64_t)) {
  cfg.validate();
  if (init.size() != model.dim) throw std::invalid_argument("init has wrong dimension");
  std::vector<ChainOutput> outputs(cfg.n_chains);
  parallel_for(static_cast<std::size_t>(cfg.n_chains), [&](std::size_t k) {
    outputs[k] = runner(model, cfg, init,
                        derive_seed(cfg.seed, std::string(tag) + "-chain-" + std::to_string(k)));
  });
  McmcResult res;
  int divergences = 0;
  double energy = 0.0;
  for (auto& o : outputs) {
    res.chains.push_back(std::move(o.draws));
    divergences += o.divergences;
    energy += o.energy_change_sum;
  }
  res.diagnostics = diagnostics(res.chains);
  for (const auto& o : outputs) res.diagnostics.accept_rate.push_back(o.accept_rate);
  res.diagnostics.divergences = divergences;
  const double total = static_cast<double>(cfg.n_chains) * cfg.n_keep;
  res.diagnostics.mean_energy_change = energy / total;
  if (divergences > 0.01 * total) {
    res.diagnostics.warnings.push_back("divergent transitions: " + std::to_string(divergences) +
                                       " of " + std::to_string(static_cast<long>(total)) +
                                       " draws");
  }
  return res;
}
}  // namespace

void McmcConfig::validate() const {
  if (n_chains < 2) throw ConfigError("mcmc.n_chains must be at least 2");
  if (n_keep < 1000) throw ConfigError("mcmc.n_keep must be at least 1000");
  if (n_warmup < 100) throw ConfigError("mcmc.n_warmup must be at least 100");
  if (hmc_leapfrog_steps < 1) throw ConfigError("mcmc.hmc_leapfrog_steps must be positive");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw ConfigError("mcmc.target_accept must lie in (0, 1)");
  }
}

double ChainDiagnostics::max_r_hat() const {
  double m = 0.0;
  for (Eigen::Index j = 0; j < r_hat.size(); ++j) {
    if (std::isfinite(r_hat(j))) m = std::max(m, r_hat(j));
  }
  return m;
}

nlohmann::json ChainDiagnostics::to_json() const {
  nlohmann::json j;
  std::vector<nlohmann::json> rh;
  for (Eigen::Index i = 0; i < r_hat.size(); ++i) {
    rh.push_back(std::isfinite(r_hat(i)) ? nlohmann::json(r_hat(i)) : nlohmann::json(nullptr));
  }
  j["r_hat"] = rh;
  j["ess"] = std::vector<double>(ess.data(), ess.data() + ess.size());
  j["accept_rate"] = accept_rate;
  j["divergences"] = divergences;
  j["mean_energy_change"] = mean_energy_change;
  j["warnings"] = warnings;
  return j;
}

Matrix McmcResult::pooled() const {
  Eigen::Index rows = 0;
  for (const auto& c : chains) rows += c.rows();
  Matrix out(rows, chains.empty() ? 0 : chains.front().cols());
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.middleRows(r, c.rows()) = c;
    r += c.rows();
  }
  return out;
}

McmcResult hmc_sample(const ModelSpec& model, const McmcConfig& cfg, const Vector& init) {
  return run_chains(model, cfg, init, "hmc", &run_hmc_chain);
}

McmcResult rwm_sample(const ModelSpec& model, const McmcConfig& cfg, const Vector& init) {
  return run_chains(model, cfg, init, "rwm", &run_rwm_chain);
}

McmcResult run_mcmc(const ModelSpec& model, const McmcConfig& cfg, const Vector& init) {
  return cfg.algorithm == McmcAlgorithm::hmc ? hmc_sample(model, cfg, init)
                                             : rwm_sample(model, cfg, init);
}

ChainDiagnostics diagnostics(const std::vector<Matrix>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("diagnostics need at least two chains");
  const int m = static_cast<int>(chains.size());
  const Eigen::Index n = chains.front().rows();
  const Eigen::Index d = chains.front().cols();
  for (const auto& c : chains) {
    if (c.rows() != n || c.cols() != d) throw std::invalid_argument("chains differ in shape");
  }
  if (n < 4) throw std::invalid_argument("chains are too short for diagnostics");

  ChainDiagnostics diag;
  diag.r_hat.resize(d);
  diag.ess.resize(d);
  diag.r_hat_defined.assign(d, true);
  const double total = static_cast<double>(m) * n;

  for (Eigen::Index j = 0; j < d; ++j) {
    // Split R-hat on 2m half-chains.
    const Eigen::Index nh = n / 2;
    std::vector<double> means, vars;
    for (const auto& c : chains) {
      for (int half = 0; half < 2; ++half) {
        const auto seg = c.col(j).segment(half * nh, nh);
        const double mu = seg.mean();
        means.push_back(mu);
        vars.push_back((seg.array() - mu).square().sum() / (nh - 1.0));
      }
    }
    const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / vars.size();
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= static_cast<double>(nh) / (means.size() - 1.0);
    const double var_plus_split = (nh - 1.0) / nh * w + b / nh;
    if (w > 0.0) {
      diag.r_hat(j) = std::sqrt(var_plus_split / w);
    } else {
      diag.r_hat(j) = kNaN;
      diag.r_hat_defined[j] = false;
    }

    // ESS from the multi-chain autocorrelation with Geyer's initial
    // monotone sequence.
    std::vector<Vector> centered;
    std::vector<double> chain_var;
    double chain_mean_sum = 0.0;
    std::vector<double> chain_means;
    for (const auto& c : chains) {
      const double mu = c.col(j).mean();
      chain_means.push_back(mu);
      chain_mean_sum += mu;
      centered.push_back(c.col(j).array() - mu);
      chain_var.push_back(centered.back().squaredNorm() / (n - 1.0));
    }
    const double w_full = std::accumulate(chain_var.begin(), chain_var.end(), 0.0) / m;
    const double gm = chain_mean_sum / m;
    double b_full = 0.0;
    for (double mu : chain_means) b_full += (mu - gm) * (mu - gm);
    b_full *= static_cast<double>(n) / (m - 1.0);
    const double var_plus = (n - 1.0) / n * w_full + b_full / n;
    if (!(var_plus > 0.0)) {
      diag.ess(j) = total;
      continue;
    }
    auto rho = [&](Eigen::Index lag) {
      double acov = 0.0;
      for (const auto& c : centered) {
        acov += c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n);
      }
      acov /= m;
      return 1.0 - (w_full - acov) / var_plus;
    };
    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (Eigen::Index lag = 0; lag + 1 < n; lag += 2) {
      double pair = rho(lag) + rho(lag + 1);
      if (pair < 0.0) break;
      pair = std::min(pair, prev_pair);
      prev_pair = pair;
      tau += 2.0 * pair;
    }
    diag.ess(j) = std::min(total, total / std::max(tau, 1e-12));
  }
  return diag;
}

}  // namespace skewfit
