#include "skewfit/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "skewfit/skew.hpp"
#include "skewfit/special.hpp"

namespace skewfit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Walks one JSON object, records which keys were consumed, and rejects the
// rest so typos fail before any compute.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    out = convert<T>(j_.at(key), where(key));
  }
  template <class T>
  T need(const std::string& key) {
    if (!has(key)) throw ConfigError(where(key) + " is required");
    return convert<T>(j_.at(key), where(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(where(k) + ": unknown field");
    }
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  template <class T>
  static T convert(const json& v, const std::string& field) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field + " must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field + " must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(field + " must be a non-negative integer");
      }
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(field + " must be an integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(field + " must be a number");
      return v.get<T>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Family parse_family(const std::string& name, const std::string& field) {
  try {
    return family_from_string(name);
  } catch (const ConfigError&) {
    throw ConfigError(field + ": unknown family '" + name + "'");
  }
}

ApproxKind parse_kind(const std::string& name, const std::string& field) {
  try {
    return approx_kind_from_string(name);
  } catch (const ConfigError&) {
    throw ConfigError(field + ": unknown approximation kind '" + name + "'");
  }
}

ApproxRequest parse_approx(const json& j, const std::string& path) {
  ApproxRequest r;
  if (j.is_string()) {
    r.kind = parse_kind(j.get<std::string>(), path + ".kind");
    return r;
  }
  Fields f(j, path);
  r.kind = parse_kind(f.need<std::string>("kind"), path + ".kind");
  if (f.has("options")) {
    Fields o(f.raw("options"), path + ".options");
    switch (r.kind) {
      case ApproxKind::laplace:
        o.read("grad_tol", r.laplace.grad_tol);
        o.read("max_iter", r.laplace.max_iter);
        break;
      case ApproxKind::gvb:
        o.read("iterations", r.gvb.iterations);
        o.read("mc_samples", r.gvb.mc_samples);
        o.read("step_size", r.gvb.step_size);
        o.read("rms_weight", r.gvb.rms_weight);
        o.read("average_from", r.gvb.average_from);
        break;
      case ApproxKind::gep:
        o.read("damping", r.gep.damping);
        o.read("tol", r.gep.tol);
        o.read("max_sweeps", r.gep.max_sweeps);
        o.read("quadrature_points", r.gep.quadrature_points);
        break;
      case ApproxKind::snp:
        break;
    }
    o.finish();
  }
  f.finish();
  const std::string opt = path + ".options";
  if (r.laplace.max_iter < 1 || !(r.laplace.grad_tol > 0)) {
    throw ConfigError(opt + ": laplace needs max_iter >= 1 and grad_tol > 0");
  }
  if (r.gvb.iterations < 1 || r.gvb.mc_samples < 1 || !(r.gvb.step_size > 0) ||
      !(r.gvb.rms_weight > 0 && r.gvb.rms_weight <= 1) ||
      !(r.gvb.average_from >= 0 && r.gvb.average_from < 1)) {
    throw ConfigError(opt + ": invalid gvb options");
  }
  if (!(r.gep.damping >= 0 && r.gep.damping < 1) || !(r.gep.tol > 0) || r.gep.max_sweeps < 1 ||
      r.gep.quadrature_points < 8) {
    throw ConfigError(opt + ": invalid gep options");
  }
  return r;
}

json approx_echo(const ApproxRequest& r) {
  json o;
  switch (r.kind) {
    case ApproxKind::laplace:
      o = {{"grad_tol", r.laplace.grad_tol}, {"max_iter", r.laplace.max_iter}};
      break;
    case ApproxKind::gvb:
      o = {{"iterations", r.gvb.iterations}, {"mc_samples", r.gvb.mc_samples},
           {"step_size", r.gvb.step_size},   {"rms_weight", r.gvb.rms_weight},
           {"average_from", r.gvb.average_from}};
      break;
    case ApproxKind::gep:
      o = {{"damping", r.gep.damping},
           {"tol", r.gep.tol},
           {"max_sweeps", r.gep.max_sweeps},
           {"quadrature_points", r.gep.quadrature_points}};
      break;
    case ApproxKind::snp:
      o = json::object();
      break;
  }
  return {{"kind", to_string(r.kind)}, {"options", o}};
}

std::string algorithm_name(McmcAlgorithm a) { return a == McmcAlgorithm::hmc ? "hmc" : "rwm"; }

void note(const CommandContext& ctx, const std::string& msg) {
  if (ctx.log) *ctx.log << msg << '\n';
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("output_dir: cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

const ModelConfig& need_model(const RunConfig& cfg) {
  if (!cfg.model) throw ConfigError("model: required for this command");
  return *cfg.model;
}

std::uint64_t data_fingerprint(const GlmModel& glm) {
  const Matrix& x = glm.design();
  Vector flat(x.size() + glm.response().size());
  flat << Eigen::Map<const Vector>(x.data(), x.size()), glm.response();
  return fingerprint(flat);
}

json model_descriptor(const RunConfig& cfg, const GlmModel& glm) {
  const ModelConfig& m = need_model(cfg);
  return {{"family", to_string(m.family)},
          {"dataset", cfg.echo.at("model").at("dataset")},
          {"response", m.response},
          {"add_intercept", m.add_intercept},
          {"prior_mean", m.prior_mean},
          {"prior_variance", m.prior_variance},
          {"n_obs", glm.n_obs()},
          {"dim", glm.dim()},
          {"data_fingerprint", data_fingerprint(glm)}};
}

SymmetricApproximation fit_kind(const ApproxRequest& req, const GlmModel& glm,
                                std::uint64_t seed) {
  const ModelSpec spec = glm.spec();
  switch (req.kind) {
    case ApproxKind::laplace:
      return fit_laplace(spec, glm.prior_mean(), req.laplace);
    case ApproxKind::gvb: {
      const auto la = fit_laplace(spec, glm.prior_mean());
      GvbOptions opts = req.gvb;
      opts.seed = derive_seed(seed, "fit-gvb");
      return fit_gvb(spec, *la.gaussian(), opts);
    }
    case ApproxKind::gep:
      return fit_gep(glm, req.gep);
    case ApproxKind::snp:
      return build_snp(spec, fit_laplace(spec, glm.prior_mean()));
  }
  throw std::logic_error("unhandled approximation kind");
}

// Serialization round trip, so fitted and loaded approximations are the
// same object bit for bit.
SymmetricApproximation canonical(const SymmetricApproximation& a) {
  return SymmetricApproximation::from_json(a.to_json());
}

// Artifact in the output directory when it matches this model, else a
// fresh fit.
SymmetricApproximation load_or_fit(const CommandContext& ctx, const ApproxRequest& req,
                                   const GlmModel& glm, const json& descriptor) {
  const RunConfig& cfg = ctx.config;
  const std::string name = artifact_name(req.kind);
  const fs::path path = fs::path(cfg.output_dir) / (name + ".json");
  if (fs::exists(path)) {
    std::ifstream in(path);
    json art = json::parse(in, nullptr, false);
    if (!art.is_discarded() && art.contains("model") && art["model"] == descriptor &&
        art.contains("approximation")) {
      note(ctx, "  " + name + ": loaded " + path.string());
      return SymmetricApproximation::from_json(art["approximation"]);
    }
    note(ctx, "  " + name + ": artifact does not match the model, refitting");
  }
  note(ctx, "  " + name + ": fitting");
  return canonical(fit_kind(req, glm, cfg.seed));
}

json fit_diagnostics_json(const FitDiagnostics& d) {
  return {{"iterations", d.iterations},   {"converged", d.converged},
          {"gradient_norm", d.gradient_norm}, {"clipped_sites", d.clipped_sites},
          {"skipped_sites", d.skipped_sites}};
}

Matrix draw_matrix(const SymmetricApproximation& a, int n, Rng& rng) {
  Matrix m(n, a.dim());
  for (int s = 0; s < n; ++s) m.row(s) = a.draw(rng).transpose();
  return m;
}

void write_draws(const fs::path& stem, const Matrix& draws, const std::vector<std::string>& names,
                 const std::string& format) {
  if (format == "binary") {
    write_samples_binary(stem.string() + ".bin", draws);
  } else {
    write_samples_csv(stem.string() + ".csv", draws, names);
  }
}

}  // namespace

std::string artifact_name(ApproxKind kind) {
  return kind == ApproxKind::laplace ? "la" : to_string(kind);
}

RunConfig parse_run_config(json doc, const std::string& base_dir, const CliOverrides& ov) {
  if (doc.is_null()) doc = json::object();
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (ov.seed) doc["seed"] = *ov.seed;
  if (ov.out) doc["output_dir"] = *ov.out;
  if (ov.approx) doc["approximations"] = *ov.approx;

  RunConfig cfg;
  Fields top(doc, "");
  cfg.seed = top.need<std::uint64_t>("seed");
  cfg.output_dir = "skewfit-out";
  top.read("output_dir", cfg.output_dir);
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");

  json echo;
  echo["seed"] = cfg.seed;

  if (top.has("model")) {
    Fields m(top.raw("model"), "model");
    ModelConfig mc;
    mc.family = parse_family(m.need<std::string>("family"), "model.family");
    const std::string dataset = m.need<std::string>("dataset");
    mc.response = m.need<std::string>("response");
    m.read("add_intercept", mc.add_intercept);
    m.read("prior_mean", mc.prior_mean);
    m.read("prior_variance", mc.prior_variance);
    m.finish();
    fs::path p(dataset);
    if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
    if (!fs::is_regular_file(p)) {
      throw ConfigError("model.dataset: file not found: " + p.string());
    }
    mc.dataset = p.string();
    if (!std::isfinite(mc.prior_mean)) throw ConfigError("model.prior_mean must be finite");
    if (!(mc.prior_variance > 0) || !std::isfinite(mc.prior_variance)) {
      throw ConfigError("model.prior_variance must be positive");
    }
    echo["model"] = {{"family", to_string(mc.family)}, {"dataset", dataset},
                     {"response", mc.response},         {"add_intercept", mc.add_intercept},
                     {"prior_mean", mc.prior_mean},     {"prior_variance", mc.prior_variance}};
    cfg.model = mc;
  }

  if (top.has("approximations")) {
    const json& list = top.raw("approximations");
    if (!list.is_array()) throw ConfigError("approximations must be an array");
    std::set<ApproxKind> kinds;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "approximations[" + std::to_string(i) + "]";
      ApproxRequest r = parse_approx(list[i], path);
      if (!kinds.insert(r.kind).second) throw ConfigError(path + ": duplicate kind");
      cfg.approximations.push_back(r);
    }
  } else {
    cfg.approximations.push_back(ApproxRequest{});
  }
  echo["approximations"] = json::array();
  for (const auto& r : cfg.approximations) echo["approximations"].push_back(approx_echo(r));

  if (top.has("mcmc")) {
    Fields m(top.raw("mcmc"), "mcmc");
    m.read("n_chains", cfg.mcmc.n_chains);
    m.read("n_warmup", cfg.mcmc.n_warmup);
    m.read("n_keep", cfg.mcmc.n_keep);
    m.read("hmc_leapfrog_steps", cfg.mcmc.hmc_leapfrog_steps);
    m.read("target_accept", cfg.mcmc.target_accept);
    if (m.has("algorithm")) {
      const auto a = Fields::convert<std::string>(m.raw("algorithm"), "mcmc.algorithm");
      if (a == "hmc") {
        cfg.mcmc.algorithm = McmcAlgorithm::hmc;
      } else if (a == "rwm") {
        cfg.mcmc.algorithm = McmcAlgorithm::rwm;
      } else {
        throw ConfigError("mcmc.algorithm: expected hmc or rwm, got '" + a + "'");
      }
    }
    m.finish();
  }
  cfg.mcmc.seed = derive_seed(cfg.seed, "mcmc");
  try {
    cfg.mcmc.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("mcmc: ") + e.what());
  }
  echo["mcmc"] = {{"n_chains", cfg.mcmc.n_chains},
                  {"n_warmup", cfg.mcmc.n_warmup},
                  {"n_keep", cfg.mcmc.n_keep},
                  {"algorithm", algorithm_name(cfg.mcmc.algorithm)},
                  {"hmc_leapfrog_steps", cfg.mcmc.hmc_leapfrog_steps},
                  {"target_accept", cfg.mcmc.target_accept}};

  if (top.has("sampling")) {
    Fields s(top.raw("sampling"), "sampling");
    s.read("n_draws", cfg.sampling.n_draws);
    s.read("format", cfg.sampling.format);
    s.finish();
    if (cfg.sampling.n_draws < 1) throw ConfigError("sampling.n_draws must be positive");
    if (cfg.sampling.format != "csv" && cfg.sampling.format != "binary") {
      throw ConfigError("sampling.format: expected csv or binary");
    }
  }
  echo["sampling"] = {{"n_draws", cfg.sampling.n_draws}, {"format", cfg.sampling.format}};

  if (top.has("compare")) {
    Fields c(top.raw("compare"), "compare");
    c.read("max_r_hat", cfg.max_r_hat);
    c.finish();
    if (!(cfg.max_r_hat >= 1.0)) throw ConfigError("compare.max_r_hat must be >= 1");
  }
  echo["compare"] = {{"max_r_hat", cfg.max_r_hat}};

  if (top.has("rates")) {
    Fields r(top.raw("rates"), "rates");
    r.read("family", cfg.rates.family);
    if (r.has("sample_sizes")) {
      const json& ns = r.raw("sample_sizes");
      if (!ns.is_array() || ns.empty()) throw ConfigError("rates.sample_sizes must be a non-empty array");
      cfg.rates.options.sample_sizes.clear();
      for (std::size_t i = 0; i < ns.size(); ++i) {
        cfg.rates.options.sample_sizes.push_back(
            Fields::convert<int>(ns[i], "rates.sample_sizes[" + std::to_string(i) + "]"));
      }
    }
    r.read("replicates", cfg.rates.options.replicates);
    r.read("grid_width", cfg.rates.options.grid_width);
    r.read("grid_points", cfg.rates.options.grid_points);
    r.finish();
  }
  {
    auto& ro = cfg.rates.options;
    ro.seed = derive_seed(cfg.seed, "rates");
    if (cfg.rates.family != "exponential" && cfg.rates.family != "gaussian") {
      throw ConfigError("rates.family: expected exponential or gaussian");
    }
    for (std::size_t i = 0; i < ro.sample_sizes.size(); ++i) {
      if (ro.sample_sizes[i] < 2 || (i > 0 && ro.sample_sizes[i] <= ro.sample_sizes[i - 1])) {
        throw ConfigError("rates.sample_sizes must be increasing integers >= 2");
      }
    }
    if (ro.replicates < 1) throw ConfigError("rates.replicates must be positive");
    if (!(ro.grid_width > 0)) throw ConfigError("rates.grid_width must be positive");
    if (ro.grid_points < 64) throw ConfigError("rates.grid_points must be >= 64");
    echo["rates"] = {{"family", cfg.rates.family},
                     {"sample_sizes", ro.sample_sizes},
                     {"replicates", ro.replicates},
                     {"grid_width", ro.grid_width},
                     {"grid_points", ro.grid_points}};
  }

  if (top.has("verify")) {
    Fields v(top.raw("verify"), "verify");
    v.read("conjugate_only", cfg.verify.conjugate_only);
    v.read("random_skewing_functions", cfg.verify.random_skewing_functions);
    v.read("ks_draws", cfg.verify.ks_draws);
    if (v.has("suites")) {
      const json& s = v.raw("suites");
      if (!s.is_array()) throw ConfigError("verify.suites must be an array");
      const auto& known = verify_suite_names();
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto name = Fields::convert<std::string>(s[i], "verify.suites[" + std::to_string(i) + "]");
        if (std::find(known.begin(), known.end(), name) == known.end()) {
          throw ConfigError("verify.suites[" + std::to_string(i) + "]: unknown suite '" + name + "'");
        }
        cfg.verify.suites.push_back(name);
      }
    }
    v.finish();
    if (cfg.verify.random_skewing_functions < 1) {
      throw ConfigError("verify.random_skewing_functions must be positive");
    }
    if (cfg.verify.ks_draws < 100) throw ConfigError("verify.ks_draws must be >= 100");
  }
  echo["verify"] = {{"conjugate_only", cfg.verify.conjugate_only},
                    {"suites", cfg.verify.suites},
                    {"random_skewing_functions", cfg.verify.random_skewing_functions},
                    {"ks_draws", cfg.verify.ks_draws}};

  top.finish();
  cfg.echo = std::move(echo);
  return cfg;
}

RunConfig load_run_config(const std::string& path, const CliOverrides& overrides) {
  if (path.empty()) return parse_run_config(json::object(), "", overrides);
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(std::move(doc), fs::path(path).parent_path().string(), overrides);
}

GlmModel build_model(const ModelConfig& cfg) {
  const Dataset ds = read_csv_dataset(cfg.dataset, cfg.response, cfg.add_intercept);
  return GlmModel(ds, cfg.family, cfg.prior_mean, cfg.prior_variance);
}

int cmd_fit(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const GlmModel glm = build_model(need_model(cfg));
  const json descriptor = model_descriptor(cfg, glm);
  const fs::path dir = out_dir(cfg);
  note(ctx, "fit: n = " + std::to_string(glm.n_obs()) + ", d = " + std::to_string(glm.dim()));

  json status = json::object();
  bool failed = false;
  for (const auto& req : cfg.approximations) {
    const std::string name = artifact_name(req.kind);
    try {
      const SymmetricApproximation a = fit_kind(req, glm, cfg.seed);
      const json approx = a.to_json();
      write_json_file(dir / (name + ".json"),
                      {{"schema_version", 1},
                       {"name", name},
                       {"model", descriptor},
                       {"approximation", approx},
                       {"diagnostics", fit_diagnostics_json(a.diagnostics)}});
      // The skewed density is 2 f(theta) w(theta) with w fixed by the model
      // and the center, so the base is all it needs.
      write_json_file(dir / ("skew-" + name + ".json"),
                      {{"schema_version", 1},
                       {"name", "skew-" + name},
                       {"kind", "skew-symmetric"},
                       {"base", name},
                       {"model", descriptor},
                       {"center", approx.at("center")},
                       {"approximation", approx}});
      status[name] = {{"status", "ok"}};
      status["skew-" + name] = {{"status", "ok"}};
      note(ctx, "  " + name + ", skew-" + name + ": written");
    } catch (const Error& e) {
      failed = true;
      status[name] = {{"status", "failed"}, {"error", e.what()}};
      note(ctx, "  " + name + ": FAILED: " + e.what());
    }
  }
  write_json_file(dir / "fit.json", {{"schema_version", 1},
                                      {"command", "fit"},
                                      {"version", version_string()},
                                      {"seed", cfg.seed},
                                      {"config", cfg.echo},
                                      {"approximations", status}});
  return failed ? kExitNumericFailure : kExitOk;
}

int cmd_sample(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const GlmModel glm = build_model(need_model(cfg));
  const json descriptor = model_descriptor(cfg, glm);
  const fs::path dir = out_dir(cfg);
  const int n = cfg.sampling.n_draws;

  json files = json::object();
  bool failed = false;
  for (const auto& req : cfg.approximations) {
    const std::string name = artifact_name(req.kind);
    try {
      const SymmetricApproximation a = load_or_fit(ctx, req, glm, descriptor);
      Rng rng(derive_seed(cfg.seed, "draws-" + name));
      write_draws(dir / ("samples-" + name), draw_matrix(a, n, rng), glm.names(),
                  cfg.sampling.format);
      const auto q = make_skew(a, glm);
      Rng rng_skew(derive_seed(cfg.seed, "draws-skew-" + name));
      write_draws(dir / ("samples-skew-" + name), stack_samples(sample_skew(q, n, rng_skew)),
                  glm.names(), cfg.sampling.format);
      const std::string ext = cfg.sampling.format == "binary" ? ".bin" : ".csv";
      files[name] = "samples-" + name + ext;
      files["skew-" + name] = "samples-skew-" + name + ext;
      note(ctx, "  " + name + ", skew-" + name + ": " + std::to_string(n) + " draws");
    } catch (const Error& e) {
      failed = true;
      files[name] = {{"status", "failed"}, {"error", e.what()}};
      note(ctx, "  " + name + ": FAILED: " + e.what());
    }
  }
  write_json_file(dir / "sample.json", {{"schema_version", 1},
                                         {"command", "sample"},
                                         {"version", version_string()},
                                         {"seed", cfg.seed},
                                         {"config", cfg.echo},
                                         {"files", files}});
  return failed ? kExitNumericFailure : kExitOk;
}

int cmd_compare(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const GlmModel glm = build_model(need_model(cfg));
  const json descriptor = model_descriptor(cfg, glm);
  const fs::path dir = out_dir(cfg);
  const ModelSpec spec = glm.spec();

  note(ctx, "compare: baseline " + algorithm_name(cfg.mcmc.algorithm) + ", " +
                std::to_string(cfg.mcmc.n_chains) + " x " + std::to_string(cfg.mcmc.n_keep) +
                " draws");
  const Vector init = fit_laplace(spec, glm.prior_mean()).center();
  const McmcResult baseline = run_mcmc(spec, cfg.mcmc, init);
  const double r_hat = baseline.diagnostics.max_r_hat();
  if (r_hat > cfg.max_r_hat) {
    write_json_file(dir / "baseline_diagnostics.json", baseline.diagnostics.to_json());
    throw EvaluationError("baseline max R-hat " + std::to_string(r_hat) + " exceeds " +
                          std::to_string(cfg.max_r_hat) +
                          "; see baseline_diagnostics.json");
  }
  const FunctionalSummary base_summary = summarize(baseline.pooled(), &glm);

  std::vector<std::pair<std::string, FunctionalSummary>> rows;
  std::vector<std::pair<std::string, std::string>> pairs;
  const int n = cfg.sampling.n_draws;
  for (const auto& req : cfg.approximations) {
    const std::string name = artifact_name(req.kind);
    const SymmetricApproximation a = load_or_fit(ctx, req, glm, descriptor);
    Rng rng(derive_seed(cfg.seed, "draws-" + name));
    rows.emplace_back(name, summarize(draw_matrix(a, n, rng), &glm));
    const auto q = make_skew(a, glm);
    Rng rng_skew(derive_seed(cfg.seed, "draws-skew-" + name));
    rows.emplace_back("skew-" + name, summarize(stack_samples(sample_skew(q, n, rng_skew)), &glm));
    pairs.emplace_back("skew-" + name, name);
  }
  ErrorTable table = error_table(rows, base_summary);
  table.mark_best(pairs);

  Report report;
  report.command = "compare";
  report.seed = cfg.seed;
  report.config = cfg.echo;
  report.tables.emplace_back("errors", table);
  json won = json::object();
  json pair_list = json::array();
  for (const auto& [skewed, sym] : pairs) {
    won[skewed + " vs " + sym] = table.columns_won(skewed, sym);
    pair_list.push_back({skewed, sym});
    note(ctx, "  " + skewed + " beats " + sym + " in " +
                  std::to_string(table.columns_won(skewed, sym)) + " of 8 columns");
  }
  report.extra["pairs"] = pair_list;
  report.extra["columns_won"] = won;
  report.extra["baseline"] = baseline.diagnostics.to_json();
  report.extra["n_draws"] = n;
  const std::string path = emit_report(report, dir.string());
  note(ctx, "report: " + path);
  return kExitOk;
}

int cmd_rates(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const fs::path dir = out_dir(cfg);
  const RateFamily family =
      cfg.rates.family == "gaussian" ? gaussian_mean_family() : exponential_rate_family();
  note(ctx, "rates: " + family.name + ", " + std::to_string(cfg.rates.options.sample_sizes.size()) +
                " sample sizes x " + std::to_string(cfg.rates.options.replicates) + " replicates");
  Report report;
  report.command = "rates";
  report.seed = cfg.seed;
  report.config = cfg.echo;
  report.curves = rate_experiment(family, cfg.rates.options);
  json slopes = json::object();
  for (const auto& c : report.curves) {
    slopes[c.variant] = c.slope_defined ? json(c.fitted_slope) : json(nullptr);
    std::ostringstream msg;
    msg << "  " << c.variant << ": slope ";
    if (c.slope_defined) {
      msg << c.fitted_slope << " (se " << c.slope_stderr << ")";
    } else {
      msg << "undefined (" << c.slope_note << ")";
    }
    note(ctx, msg.str());
  }
  report.extra["family"] = family.name;
  report.extra["slopes"] = slopes;
  const std::string path = emit_report(report, dir.string());
  note(ctx, "report: " + path);
  return kExitOk;
}

int cmd_verify(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const fs::path dir = out_dir(cfg);
  VerifyOptions opts;
  opts.battery.seed = derive_seed(cfg.seed, "battery");
  opts.battery.conjugate_only = cfg.verify.conjugate_only;
  opts.random_skewing_functions = cfg.verify.random_skewing_functions;
  opts.ks_draws = cfg.verify.ks_draws;
  opts.suites = cfg.verify.suites;
  const VerifyReport rep = run_verify(opts);

  json doc = rep.to_json();
  doc["schema_version"] = 1;
  doc["command"] = "verify";
  doc["version"] = version_string();
  doc["seed"] = cfg.seed;
  doc["timestamp"] = utc_timestamp();
  doc["config"] = cfg.echo;
  write_json_file(dir / "verify.json", doc);

  for (const auto& s : verify_suite_names()) {
    const int size = rep.suite_size(s);
    if (size == 0) continue;
    note(ctx, "  " + s + ": " + (rep.suite_passed(s) ? "pass" : "FAIL") + " (" +
                  std::to_string(size) + " checks)");
  }
  for (const auto& c : rep.checks) {
    if (!c.passed) {
      note(ctx, "  failed: " + c.suite + "/" + c.case_name + "/" + c.check + " value " +
                    std::to_string(c.value) + (c.detail.empty() ? "" : " (" + c.detail + ")"));
    }
  }
  note(ctx, std::string("verify: ") + (rep.passed() ? "all suites pass" : "FAILED") +
                "; report " + (dir / "verify.json").string());
  return rep.passed() ? kExitOk : kExitSuiteFailure;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"fit", "sample", "compare", "rates", "verify"};
  return names;
}

int run_command(const std::string& command, const std::string& config_path,
                const CliOverrides& overrides, bool quiet, std::ostream& out,
                std::ostream& err) {
  try {
    CommandContext ctx{load_run_config(config_path, overrides), quiet ? nullptr : &out};
    if (command == "fit") return cmd_fit(ctx);
    if (command == "sample") return cmd_sample(ctx);
    if (command == "compare") return cmd_compare(ctx);
    if (command == "rates") return cmd_rates(ctx);
    if (command == "verify") return cmd_verify(ctx);
    err << "error: unknown command '" << command << "'\n";
    return kExitConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const Error& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumericFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumericFailure;
  }
}

}  // namespace skewfit
