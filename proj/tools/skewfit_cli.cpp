// skewfit command-line entry point.
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "skewfit/cli.hpp"

namespace {

std::vector<std::string> split_kinds(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skew-symmetric posterior approximations for Bayesian GLMs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", skewfit::version_string());

  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string approx;
  bool quiet = false;

  const std::map<std::string, std::string> help = {
      {"fit", "fit approximations and their skewed counterparts"},
      {"sample", "draw from fitted approximations"},
      {"compare", "error table against an MCMC baseline"},
      {"rates", "TV convergence-rate experiment"},
      {"verify", "run the invariant battery"}};
  std::vector<CLI::Option*> seed_opts, out_opts, approx_opts;
  for (const auto& name : skewfit::command_names()) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    seed_opts.push_back(sub->add_option("--seed", seed, "master seed (overrides config)"));
    out_opts.push_back(sub->add_option("--out", out, "output directory (overrides config)"));
    approx_opts.push_back(
        sub->add_option("--approx", approx, "comma-separated kinds: laplace,gvb,gep,snp"));
    sub->add_flag("--quiet", quiet, "suppress progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : skewfit::kExitConfigError;
  }

  skewfit::CliOverrides ov;
  for (auto* o : seed_opts)
    if (o->count()) ov.seed = seed;
  for (auto* o : out_opts)
    if (o->count()) ov.out = out;
  for (auto* o : approx_opts)
    if (o->count()) ov.approx = split_kinds(approx);

  const std::string command = app.get_subcommands().front()->get_name();
  return skewfit::run_command(command, config, ov, quiet, std::cout, std::cerr);
}
