#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "skewfit/cli.hpp"

using namespace skewfit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json poisson_doc() {
  return {{"seed", 5},
          {"model",
           {{"family", "poisson"},
            {"dataset", testutil::source_path("data/substance_use.csv")},
            {"response", "count"}}}};
}

std::string config_error(const json& doc) {
  try {
    parse_run_config(doc, "");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config defaults and overrides") {
  const RunConfig cfg = parse_run_config(poisson_doc(), "");
  CHECK(cfg.seed == 5);
  REQUIRE(cfg.model.has_value());
  CHECK(cfg.model->family == Family::poisson_log);
  CHECK(cfg.model->add_intercept);
  CHECK(cfg.approximations.size() == 1);
  CHECK(cfg.mcmc.n_keep == 10000);
  CHECK(cfg.mcmc.n_chains == 4);
  CHECK_FALSE(cfg.echo.contains("output_dir"));

  CliOverrides ov;
  ov.seed = 99;
  ov.approx = std::vector<std::string>{"laplace", "gep"};
  ov.out = "/tmp/x";
  const RunConfig o = parse_run_config(poisson_doc(), "", ov);
  CHECK(o.seed == 99);
  CHECK(o.output_dir == "/tmp/x");
  CHECK(o.approximations.size() == 2);
  CHECK(o.approximations[1].kind == ApproxKind::gep);
}

TEST_CASE("schema violations name the field") {
  json d = poisson_doc();
  d["approximations"] = json::array({{{"kind", "foo"}}});
  CHECK(config_error(d).find("approximations[0].kind") != std::string::npos);

  d = poisson_doc();
  d.erase("seed");
  CHECK(config_error(d).find("seed") != std::string::npos);

  d = poisson_doc();
  d["seed"] = -1;
  CHECK(config_error(d).find("seed") != std::string::npos);

  d = poisson_doc();
  d["mcmc"] = {{"n_chians", 4}};
  CHECK(config_error(d).find("mcmc.n_chians") != std::string::npos);

  d = poisson_doc();
  d["mcmc"] = {{"n_chains", 1}};
  CHECK(config_error(d).find("mcmc") != std::string::npos);

  d = poisson_doc();
  d["model"]["dataset"] = "/no/such/file.csv";
  CHECK(config_error(d).find("model.dataset") != std::string::npos);

  d = poisson_doc();
  d["model"]["prior_variance"] = "big";
  CHECK(config_error(d).find("model.prior_variance") != std::string::npos);

  d = poisson_doc();
  d["approximations"] = json::array({{{"kind", "gvb"}, {"options", {{"damping", 0.5}}}}});
  CHECK(config_error(d).find("approximations[0].options.damping") != std::string::npos);

  d = poisson_doc();
  d["approximations"] = json::array({"laplace", "la"});
  CHECK(config_error(d).find("duplicate") != std::string::npos);

  d = poisson_doc();
  d["rates"] = {{"sample_sizes", {100, 50}}};
  CHECK(config_error(d).find("rates.sample_sizes") != std::string::npos);

  d = poisson_doc();
  d["verify"] = {{"suites", {"bogus"}}};
  CHECK(config_error(d).find("verify.suites[0]") != std::string::npos);
}

TEST_CASE("fit writes la and skew-la and is deterministic") {
  const fs::path dir = fs::temp_directory_path() / "skewfit_test_fit";
  fs::remove_all(dir);
  CliOverrides ov;
  ov.out = (dir / "a").string();
  CommandContext ctx{parse_run_config(poisson_doc(), "", ov), nullptr};
  CHECK(cmd_fit(ctx) == kExitOk);
  CHECK(fs::exists(dir / "a" / "la.json"));
  CHECK(fs::exists(dir / "a" / "skew-la.json"));
  const json art = json::parse(slurp(dir / "a" / "skew-la.json"));
  CHECK(art.at("base") == "la");
  CHECK(art.at("model").at("dim") == 16);

  ov.out = (dir / "b").string();
  CommandContext again{parse_run_config(poisson_doc(), "", ov), nullptr};
  CHECK(cmd_fit(again) == kExitOk);
  for (const char* f : {"la.json", "skew-la.json", "fit.json"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
}

TEST_CASE("fit failures are per approximation") {
  const fs::path dir = fs::temp_directory_path() / "skewfit_test_fit_fail";
  fs::remove_all(dir);
  CliOverrides ov;
  ov.out = dir.string();
  ov.approx = std::vector<std::string>{"snp", "laplace"};
  CommandContext ctx{parse_run_config(poisson_doc(), "", ov), nullptr};
  CHECK(cmd_fit(ctx) == kExitNumericFailure);
  CHECK(fs::exists(dir / "la.json"));
  CHECK_FALSE(fs::exists(dir / "snp.json"));
  const json status = json::parse(slurp(dir / "fit.json")).at("approximations");
  CHECK(status.at("snp").at("status") == "failed");
  CHECK(status.at("la").at("status") == "ok");
}

TEST_CASE("sample writes draw files") {
  const fs::path dir = fs::temp_directory_path() / "skewfit_test_sample";
  fs::remove_all(dir);
  json d = poisson_doc();
  d["sampling"] = {{"n_draws", 500}, {"format", "binary"}};
  CliOverrides ov;
  ov.out = dir.string();
  CommandContext ctx{parse_run_config(d, "", ov), nullptr};
  CHECK(cmd_sample(ctx) == kExitOk);
  const Matrix s = read_samples_binary((dir / "samples-skew-la.bin").string());
  CHECK(s.rows() == 500);
  CHECK(s.cols() == 16);
}

TEST_CASE("compare aborts when the baseline has not mixed") {
  const fs::path dir = fs::temp_directory_path() / "skewfit_test_rhat";
  fs::remove_all(dir);
  json d = poisson_doc();
  // a short run's max split R-hat over 16 coordinates sits just above 1
  d["compare"] = {{"max_r_hat", 1.0}};
  d["mcmc"] = {{"n_keep", 1000}, {"n_warmup", 200}};
  std::ostringstream out, err;
  const fs::path cfg = dir / "cfg.json";
  fs::create_directories(dir);
  std::ofstream(cfg) << d.dump();
  CliOverrides ov;
  ov.out = dir.string();
  CHECK(run_command("compare", cfg.string(), ov, true, out, err) == kExitNumericFailure);
  CHECK(err.str().find("R-hat") != std::string::npos);
  CHECK(fs::exists(dir / "baseline_diagnostics.json"));
}

TEST_CASE("run_command exit codes") {
  std::ostringstream out, err;
  CHECK(run_command("verify", "", {}, true, out, err) == kExitConfigError);
  CHECK(err.str().find("seed") != std::string::npos);
  CHECK(run_command("launch", "", {}, true, out, err) == kExitConfigError);
  CHECK(run_command("fit", "/no/such/config.json", {}, true, out, err) == kExitConfigError);

  const fs::path dir = fs::temp_directory_path() / "skewfit_test_rates";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "rates.json";
  std::ofstream(cfg) << R"({"seed": 3, "rates": {"sample_sizes": [100], "replicates": 2}})";
  CliOverrides ov;
  ov.out = dir.string();
  CHECK(run_command("rates", cfg.string(), ov, true, out, err) == kExitOk);
  const json rep = json::parse(slurp(dir / "report.json"));
  CHECK(rep.at("curves").size() == 3);
  CHECK(rep.at("curves")[0].at("slope_defined") == false);
  CHECK(rep.at("slopes").at("q1").is_null());
}

}
