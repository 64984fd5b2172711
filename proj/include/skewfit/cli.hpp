#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "skewfit/bench.hpp"
#include "skewfit/mcmc.hpp"
#include "skewfit/symmetric.hpp"
#include "skewfit/verify.hpp"

namespace skewfit {

/// Exit codes shared by every command.
enum ExitCode : int {
  kExitOk = 0,
  kExitSuiteFailure = 1,
  kExitConfigError = 2,
  kExitNumericFailure = 3,
};

struct ModelConfig {
  Family family = Family::poisson_log;
  std::string dataset;  // resolved against the config file's directory
  std::string response;
  bool add_intercept = true;
  double prior_mean = 0.0;
  double prior_variance = 4.0;
};

/// One requested approximation with its fitter options.
struct ApproxRequest {
  ApproxKind kind = ApproxKind::laplace;
  LaplaceOptions laplace;
  GvbOptions gvb;
  EpOptions gep;
};

struct SamplingConfig {
  int n_draws = 10000;
  std::string format = "csv";  // csv | binary
};

struct RatesConfig {
  std::string family = "exponential";  // exponential | gaussian
  RateOptions options;
};

struct VerifyConfig {
  bool conjugate_only = false;
  std::vector<std::string> suites;
  int random_skewing_functions = 50;
  int ks_draws = 100000;
};

struct RunConfig {
  std::optional<ModelConfig> model;
  std::vector<ApproxRequest> approximations;
  McmcConfig mcmc;
  SamplingConfig sampling;
  double max_r_hat = 1.05;
  RatesConfig rates;
  VerifyConfig verify;
  std::string output_dir;
  std::uint64_t seed = 0;
  /// Input document after defaults, minus output_dir; echoed into reports.
  nlohmann::json echo;
};

/// Command-line overrides; applied before validation.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::vector<std::string>> approx;
};

/// Schema check plus conversion. Unknown keys, wrong types, bad kinds and
/// a missing seed raise ConfigError naming the offending field.
RunConfig parse_run_config(nlohmann::json doc, const std::string& base_dir,
                           const CliOverrides& overrides = {});
RunConfig load_run_config(const std::string& path, const CliOverrides& overrides = {});

/// Short artifact name: la, gvb, gep, snp.
std::string artifact_name(ApproxKind kind);

/// The GLM a config describes.
GlmModel build_model(const ModelConfig& cfg);

struct CommandContext {
  RunConfig config;
  std::ostream* log = nullptr;  // null: quiet
};

/// Each returns an ExitCode. Files are written under config.output_dir.
int cmd_fit(const CommandContext& ctx);
int cmd_sample(const CommandContext& ctx);
int cmd_compare(const CommandContext& ctx);
int cmd_rates(const CommandContext& ctx);
int cmd_verify(const CommandContext& ctx);

const std::vector<std::string>& command_names();

/// Load config, dispatch, and map exceptions to exit codes. Errors go to
/// `err` regardless of `quiet`.
int run_command(const std::string& command, const std::string& config_path,
                const CliOverrides& overrides, bool quiet, std::ostream& out,
                std::ostream& err);

}  // namespace skewfit
