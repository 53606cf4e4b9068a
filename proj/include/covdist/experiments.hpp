#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "covdist/clustering.hpp"
#include "covdist/contour.hpp"
#include "covdist/population.hpp"

namespace covdist {

/// Declarative description of one experiment run; parsed from JSON.
struct ExperimentConfig {
  std::string kind;            // histogram | mse | clustering | estimate | asymptotics
  std::vector<double> rho;     // Toeplitz coefficients, one per observation set
  std::vector<int> dims;       // M grid (ascending)
  std::vector<double> ratios;  // c_j = M/N_j (scalar broadcast allowed)
  std::vector<int> counts;     // explicit N grid (mse) or per-set N
  Field field = Field::Real;
  std::vector<std::string> metrics;
  int trials = 1000;
  std::uint64_t seed = 1;
  std::string out;             // empty or "-" means stdout
  std::string format = "csv";  // csv | json
  int threads = 0;             // 0: COVDIST_THREADS or hardware
  QuadratureOptions quad;

  static ExperimentConfig from_json_text(const std::string& text,
                                         const std::string& origin);
  static ExperimentConfig load(const std::string& path);
  void validate() const;
};

/// Flat result table with provenance columns; writable as CSV or JSON rows.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  void write(std::ostream& os, const std::string& format) const;
  void write_file(const std::string& path, const std::string& format) const;
};

/// Fluctuation histograms (per metric and M): empirical samples of the
/// consistent estimator, the matching Gaussian curve, and the KS distance.
ResultTable run_histogram(const ExperimentConfig& config);

/// Normalized (or absolute, when the true distance vanishes) MSE of plug-in
/// and consistent estimators over an N grid with M = round(c N).
ResultTable run_mse(const ExperimentConfig& config);

/// Theoretical and empirical clustering success probabilities.
ResultTable run_clustering(const ExperimentConfig& config);

/// Asymptotic descriptors (d, second-order mean, covariance) per metric/M.
ResultTable run_asymptotics(const ExperimentConfig& config);

/// Options for the single-estimate entry point (CLI `estimate`).
struct EstimateOptions {
  double rho1 = 0.0, rho2 = 0.0;
  int dim = 0;
  int n1 = 0, n2 = 0;
  std::string metric = "le";   // eu | kl | le | all
  std::uint64_t seed = 1;
  Field field = Field::Real;
  std::string y1_path, y2_path;  // optional observation files (CSV matrices)
  QuadratureOptions quad;
};

/// True (when models are known), plug-in and consistent estimates as a table.
ResultTable run_estimate(const EstimateOptions& opts);

}  // namespace covdist
