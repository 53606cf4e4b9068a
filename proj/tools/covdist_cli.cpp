#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "covdist/errors.hpp"
#include "covdist/experiments.hpp"
#include "covdist/version.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::string format;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int trials = 0;
  int threads = -1;
  int quad_nodes = 0;
  int quad_max = 0;
  double quad_tol = 0.0;
};

void attach_common(CLI::App* cmd, CommonOpts& opts, bool needs_config) {
  auto* c = cmd->add_option("--config", opts.config_path, "JSON config file");
  if (needs_config) c->required();
  cmd->add_option("--out", opts.out, "output path ('-' for stdout)");
  cmd->add_option("--format", opts.format, "csv or json");
  cmd->add_option("--seed", opts.seed, "master seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--trials", opts.trials, "Monte Carlo trials");
  cmd->add_option("--threads", opts.threads,
                  "worker threads (0: auto / COVDIST_THREADS)");
  cmd->add_option("--quad-nodes", opts.quad_nodes, "initial quadrature nodes");
  cmd->add_option("--quad-max", opts.quad_max, "quadrature node cap");
  cmd->add_option("--quad-tol", opts.quad_tol, "quadrature relative tolerance");
}

covdist::ExperimentConfig merged_config(const CommonOpts& opts,
                                        const std::string& kind) {
  covdist::ExperimentConfig cfg = covdist::ExperimentConfig::load(opts.config_path);
  if (cfg.kind != kind)
    throw covdist::config_error(opts.config_path + ": config kind '" + cfg.kind +
                                "' does not match subcommand '" + kind + "'");
  if (opts.seed_set) cfg.seed = opts.seed;
  if (opts.trials > 0) cfg.trials = opts.trials;
  if (opts.threads >= 0) cfg.threads = opts.threads;
  if (!opts.out.empty()) cfg.out = opts.out;
  if (!opts.format.empty()) cfg.format = opts.format;
  if (opts.quad_nodes > 0) cfg.quad.initial_nodes = opts.quad_nodes;
  if (opts.quad_max > 0) cfg.quad.max_nodes = opts.quad_max;
  if (opts.quad_tol > 0) cfg.quad.rel_tol = opts.quad_tol;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistent covariance-distance estimation and asymptotics"};
  app.set_version_flag("--version", covdist::kVersion);
  app.require_subcommand(1);

  CommonOpts est_common, hist_common, mse_common, clust_common, asym_common;

  // estimate: direct options or observation files.
  covdist::EstimateOptions est;
  std::string est_field = "real";
  auto* estimate = app.add_subcommand(
      "estimate", "true / plug-in / consistent distances for one pair");
  estimate->add_option("--rho1", est.rho1, "Toeplitz coefficient of set 1");
  estimate->add_option("--rho2", est.rho2, "Toeplitz coefficient of set 2");
  estimate->add_option("--M", est.dim, "observation dimension");
  estimate->add_option("--N1", est.n1, "sample count of set 1");
  estimate->add_option("--N2", est.n2, "sample count of set 2");
  estimate->add_option("--metric", est.metric, "eu|kl|le|all");
  estimate->add_option("--y1", est.y1_path, "CSV observation matrix, set 1");
  estimate->add_option("--y2", est.y2_path, "CSV observation matrix, set 2");
  attach_common(estimate, est_common, false);

  auto* histogram = app.add_subcommand("histogram", "fluctuation histograms");
  attach_common(histogram, hist_common, true);
  auto* mse = app.add_subcommand("mse", "estimator MSE over an N grid");
  attach_common(mse, mse_common, true);
  auto* clustering =
      app.add_subcommand("clustering", "clustering success probabilities");
  attach_common(clustering, clust_common, true);
  auto* asymptotics =
      app.add_subcommand("asymptotics", "asymptotic mean/variance tables");
  attach_common(asymptotics, asym_common, true);

  CLI11_PARSE(app, argc, argv);

  try {
    covdist::ResultTable table;
    std::string out = "-";
    std::string format = "json";
    if (estimate->parsed()) {
      if (est_common.seed_set) est.seed = est_common.seed;
      if (est_common.quad_nodes > 0) est.quad.initial_nodes = est_common.quad_nodes;
      if (est_common.quad_max > 0) est.quad.max_nodes = est_common.quad_max;
      if (est_common.quad_tol > 0) est.quad.rel_tol = est_common.quad_tol;
      table = covdist::run_estimate(est);
      if (!est_common.out.empty()) out = est_common.out;
      if (!est_common.format.empty()) format = est_common.format;
    } else if (histogram->parsed()) {
      auto cfg = merged_config(hist_common, "histogram");
      table = covdist::run_histogram(cfg);
      out = cfg.out.empty() ? "-" : cfg.out;
      format = cfg.format;
    } else if (mse->parsed()) {
      auto cfg = merged_config(mse_common, "mse");
      table = covdist::run_mse(cfg);
      out = cfg.out.empty() ? "-" : cfg.out;
      format = cfg.format;
    } else if (clustering->parsed()) {
      auto cfg = merged_config(clust_common, "clustering");
      table = covdist::run_clustering(cfg);
      out = cfg.out.empty() ? "-" : cfg.out;
      format = cfg.format;
    } else if (asymptotics->parsed()) {
      auto cfg = merged_config(asym_common, "asymptotics");
      table = covdist::run_asymptotics(cfg);
      out = cfg.out.empty() ? "-" : cfg.out;
      format = cfg.format;
    }
    table.write_file(out, format);
  } catch (const covdist::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const covdist::error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
