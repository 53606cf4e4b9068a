#include "covdist/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "covdist/estimators.hpp"
#include "covdist/parallel.hpp"
#include "covdist/rng.hpp"
#include "covdist/sampling.hpp"
#include "covdist/spectrum.hpp"
#include "covdist/stats.hpp"
#include "covdist/version.hpp"

namespace covdist {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }

std::string quad_string(const QuadratureOptions& q) {
  std::ostringstream os;
  os << q.initial_nodes << ":" << q.max_nodes << ":" << q.rel_tol;
  return os.str();
}

int line_of_byte(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

std::vector<double> parse_ratio_list(const nlohmann::json& v) {
  std::vector<double> out;
  if (v.is_number())
    out.push_back(v.get<double>());
  else
    for (const auto& x : v) out.push_back(x.get<double>());
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error(origin + ":" + std::to_string(line_of_byte(text, e.byte)) +
                       ": " + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.kind = j.at("kind").get<std::string>();
    if (j.contains("rho"))
      for (const auto& x : j["rho"]) cfg.rho.push_back(x.get<double>());
    if (j.contains("M")) {
      if (j["M"].is_number())
        cfg.dims.push_back(j["M"].get<int>());
      else
        for (const auto& x : j["M"]) cfg.dims.push_back(x.get<int>());
    }
    if (j.contains("c")) cfg.ratios = parse_ratio_list(j["c"]);
    if (j.contains("N")) {
      if (j["N"].is_number())
        cfg.counts.push_back(j["N"].get<int>());
      else
        for (const auto& x : j["N"]) cfg.counts.push_back(x.get<int>());
    }
    if (j.contains("field")) {
      const std::string f = j["field"].get<std::string>();
      if (f == "real")
        cfg.field = Field::Real;
      else if (f == "complex")
        cfg.field = Field::Complex;
      else
        throw config_error(origin + ": field must be 'real' or 'complex'");
    }
    if (j.contains("metrics"))
      for (const auto& x : j["metrics"]) cfg.metrics.push_back(x.get<std::string>());
    if (j.contains("trials")) cfg.trials = j["trials"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) cfg.out = j["out"].get<std::string>();
    if (j.contains("format")) cfg.format = j["format"].get<std::string>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
    if (j.contains("quadrature")) {
      const auto& q = j["quadrature"];
      if (q.contains("initial_nodes"))
        cfg.quad.initial_nodes = q["initial_nodes"].get<int>();
      if (q.contains("max_nodes")) cfg.quad.max_nodes = q["max_nodes"].get<int>();
      if (q.contains("rel_tol")) cfg.quad.rel_tol = q["rel_tol"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(origin + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error(path + ": cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str(), path);
}

void ExperimentConfig::validate() const {
  static const char* kinds[] = {"histogram", "mse", "clustering", "asymptotics"};
  if (std::find(std::begin(kinds), std::end(kinds), kind) == std::end(kinds))
    throw config_error("kind must be histogram|mse|clustering|asymptotics");
  if (trials < 1) throw config_error("trials must be >= 1");
  if (rho.empty()) throw config_error("rho list must be non-empty");
  for (double r : rho)
    if (!(std::fabs(r) < 1.0)) throw config_error("every |rho| must be < 1");
  for (double c : ratios) {
    if (!(c > 0.0)) throw config_error("every c must be positive");
    if (c == 1.0) throw config_error("c = 1 is excluded (c_j != 1)");
  }
  if (!std::is_sorted(dims.begin(), dims.end()))
    throw config_error("M list must be ascending");
  if (metrics.empty()) throw config_error("metrics list must be non-empty");
  for (const auto& m : metrics) metric_by_name(m);  // throws for unknown names
  if (format != "csv" && format != "json")
    throw config_error("format must be csv or json");
  if (kind == "mse") {
    if (rho.size() != 2) throw config_error("mse: rho must have 2 entries");
    if (ratios.size() != 1) throw config_error("mse: c must be a scalar");
    if (counts.empty()) throw config_error("mse: N grid required");
  } else if (kind == "histogram" || kind == "asymptotics") {
    if (rho.size() != 2)
      throw config_error(kind + ": rho must have 2 entries (single pair)");
    if (dims.empty()) throw config_error(kind + ": M list required");
    if (ratios.size() != 1 && ratios.size() != 2)
      throw config_error(kind + ": c must have 1 or 2 entries");
  } else if (kind == "clustering") {
    if (rho.size() < 4) throw config_error("clustering: needs >= 4 sets");
    if (dims.empty()) throw config_error("clustering: M list required");
    if (ratios.empty()) throw config_error("clustering: c required");
  }
}

void ResultTable::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size())
    throw internal_consistency_error("ResultTable: row width mismatch");
  rows.push_back(std::move(row));
}

void ResultTable::write(std::ostream& os, const std::string& format) const {
  if (format == "csv") {
    for (std::size_t i = 0; i < columns.size(); ++i)
      os << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    for (const auto& row : rows)
      for (std::size_t i = 0; i < row.size(); ++i)
        os << row[i] << (i + 1 < row.size() ? "," : "\n");
    return;
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json obj;
    for (std::size_t i = 0; i < columns.size(); ++i) obj[columns[i]] = row[i];
    arr.push_back(std::move(obj));
  }
  os << arr.dump(2) << "\n";
}

void ResultTable::write_file(const std::string& path,
                             const std::string& format) const {
  if (path.empty() || path == "-") {
    write(std::cout, format);
    return;
  }
  std::ofstream out(path);
  if (!out) throw config_error(path + ": cannot open output file");
  write(out, format);
}

namespace {

int count_from_ratio(int m, double c) {
  const int n = static_cast<int>(std::lround(m / c));
  if (n < 1) throw config_error("derived sample count is not positive");
  return n;
}

struct PairSetup {
  PopulationModel m1, m2;
  int n1, n2;
};

PairSetup pair_setup(const ExperimentConfig& cfg, int m) {
  const double c1 = cfg.ratios.front();
  const double c2 = cfg.ratios.back();
  return {toeplitz_model(cfg.rho[0], m, cfg.field),
          toeplitz_model(cfg.rho[1], m, cfg.field), count_from_ratio(m, c1),
          count_from_ratio(m, c2)};
}

PairSystem pair_system_of(const PairSetup& setup, const MetricSpec& metric,
                          Field field) {
  PairSystem sys;
  sys.models = {setup.m1, setup.m2};
  sys.sample_counts = {setup.n1, setup.n2};
  sys.pairs = {{0, 1}};
  sys.metric = metric;
  sys.field = field;
  return sys;
}

/// Consistent-estimator samples for one pair scenario, one slot per trial.
std::vector<std::vector<double>> sample_distances(
    const PairSetup& setup, const std::vector<MetricSpec>& metrics, Field field,
    std::uint64_t seed, int trials, int threads, bool plug_in,
    const QuadratureOptions& quad) {
  std::vector<std::vector<double>> out(metrics.size(),
                                       std::vector<double>(trials));
  parallel_for(trials, threads, [&](int t) {
    const std::uint64_t s1 = derive_seed(seed, 1, static_cast<unsigned>(t));
    const std::uint64_t s2 = derive_seed(seed, 2, static_cast<unsigned>(t));
    if (field == Field::Real) {
      const auto sp1 = scm_spectrum(sample_gaussian(setup.m1, setup.n1, s1));
      const auto sp2 = scm_spectrum(sample_gaussian(setup.m2, setup.n2, s2));
      for (std::size_t k = 0; k < metrics.size(); ++k)
        out[k][t] = plug_in
                        ? plugin_distance(sp1, sp2, metrics[k]).value
                        : consistent_distance(sp1, sp2, metrics[k], quad).value;
    } else {
      const auto sp1 =
          scm_spectrum(sample_gaussian_complex(setup.m1, setup.n1, s1));
      const auto sp2 =
          scm_spectrum(sample_gaussian_complex(setup.m2, setup.n2, s2));
      for (std::size_t k = 0; k < metrics.size(); ++k)
        out[k][t] = plug_in
                        ? plugin_distance(sp1, sp2, metrics[k]).value
                        : consistent_distance(sp1, sp2, metrics[k], quad).value;
    }
  });
  return out;
}

}  // namespace

ResultTable run_histogram(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.kind != "histogram") throw config_error("run_histogram: wrong kind");
  const int threads = resolve_threads(cfg.threads);
  ResultTable table;
  table.columns = {"record", "metric", "M",  "N1",          "N2",
                   "index",  "x",      "y",  "d",           "mean_theory",
                   "sd_theory", "ks",  "seed", "trials",    "quadrature",
                   "version"};
  std::vector<MetricSpec> metrics;
  for (const auto& name : cfg.metrics) metrics.push_back(metric_by_name(name));

  for (std::size_t mi = 0; mi < cfg.dims.size(); ++mi) {
    const int m = cfg.dims[mi];
    const PairSetup setup = pair_setup(cfg, m);
    const std::uint64_t stream = derive_seed(cfg.seed, 0x811, mi);
    const auto samples = sample_distances(setup, metrics, cfg.field, stream,
                                          cfg.trials, threads, false, cfg.quad);
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      const auto law =
          asymptotic_law(pair_system_of(setup, metrics[k], cfg.field), cfg.quad);
      const double mean = law.distance(0) + law.second_order_mean(0) / m;
      const double sd = std::sqrt(law.covariance(0, 0)) / m;
      const double ks = ks_statistic_normal(samples[k], mean, sd);
      const auto prov = [&](const std::string& record, const std::string& index,
                            const std::string& x, const std::string& y) {
        table.add_row({record, metrics[k].name, fmt(m), fmt(setup.n1),
                       fmt(setup.n2), index, x, y, fmt(law.distance(0)),
                       fmt(mean), fmt(sd), fmt(ks), fmt(cfg.seed),
                       fmt(cfg.trials), quad_string(cfg.quad), kVersion});
      };
      prov("summary", "", "", "");
      for (int t = 0; t < cfg.trials; ++t)
        prov("sample", fmt(t), fmt(samples[k][t]), "");
      const int grid = 101;
      for (int gi = 0; gi < grid; ++gi) {
        const double x = mean + sd * (-4.0 + 8.0 * gi / (grid - 1));
        const double pdf = std::exp(-0.5 * (x - mean) * (x - mean) / (sd * sd)) /
                           (sd * 2.5066282746310005);
        prov("curve", fmt(gi), fmt(x), fmt(pdf));
      }
    }
  }
  return table;
}

ResultTable run_mse(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.kind != "mse") throw config_error("run_mse: wrong kind");
  const int threads = resolve_threads(cfg.threads);
  ResultTable table;
  table.columns = {"metric", "estimator", "N",      "M",     "mse",
                   "normalized", "d",     "seed",   "trials", "quadrature",
                   "version"};
  std::vector<MetricSpec> metrics;
  for (const auto& name : cfg.metrics) metrics.push_back(metric_by_name(name));
  const bool normalized = cfg.rho[0] != cfg.rho[1];

  for (std::size_t ni = 0; ni < cfg.counts.size(); ++ni) {
    const int n = cfg.counts[ni];
    const int m = static_cast<int>(std::lround(cfg.ratios[0] * n));
    if (m < 1) throw config_error("mse: derived M is not positive");
    PairSetup setup{toeplitz_model(cfg.rho[0], m, cfg.field),
                    toeplitz_model(cfg.rho[1], m, cfg.field), n, n};
    const std::uint64_t stream = derive_seed(cfg.seed, 0x35e, ni);
    for (int plug_in = 0; plug_in < 2; ++plug_in) {
      const auto samples =
          sample_distances(setup, metrics, cfg.field, stream, cfg.trials,
                           threads, plug_in != 0, cfg.quad);
      for (std::size_t k = 0; k < metrics.size(); ++k) {
        const double d = true_distance(setup.m1, setup.m2, metrics[k]);
        double mse = 0.0;
        for (double v : samples[k]) {
          const double err = normalized ? (v - d) / d : v;
          mse += err * err;
        }
        mse /= cfg.trials;
        table.add_row({metrics[k].name, plug_in ? "plugin" : "consistent",
                       fmt(n), fmt(m), fmt(mse), normalized ? "1" : "0", fmt(d),
                       fmt(cfg.seed), fmt(cfg.trials), quad_string(cfg.quad),
                       kVersion});
      }
    }
  }
  return table;
}

namespace {

ClusteringScenario scenario_of(const ExperimentConfig& cfg, int m) {
  ClusteringScenario sc;
  sc.metric = metric_by_name(cfg.metrics.front());
  sc.field = cfg.field;
  // Ground-truth labels: runs of equal rho values form the clusters.
  std::vector<double> group_rho;
  for (double r : cfg.rho) {
    if (group_rho.empty() || group_rho.back() != r) group_rho.push_back(r);
    sc.labels.push_back(static_cast<int>(group_rho.size()) - 1);
  }
  for (double r : cfg.rho) sc.models.push_back(toeplitz_model(r, m, cfg.field));
  const int sets = static_cast<int>(cfg.rho.size());
  const int groups = static_cast<int>(group_rho.size());
  for (int j = 0; j < sets; ++j) {
    double c;
    if (cfg.ratios.size() == 1)
      c = cfg.ratios[0];
    else if (static_cast<int>(cfg.ratios.size()) == groups)
      c = cfg.ratios[sc.labels[j]];
    else if (static_cast<int>(cfg.ratios.size()) == sets)
      c = cfg.ratios[j];
    else
      throw config_error("clustering: c must have 1, one-per-group or "
                         "one-per-set entries");
    sc.sample_counts.push_back(count_from_ratio(m, c));
  }
  return sc;
}

}  // namespace

ResultTable run_clustering(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.kind != "clustering") throw config_error("run_clustering: wrong kind");
  const int threads = resolve_threads(cfg.threads);
  ResultTable table;
  table.columns = {"metric",  "M",      "p_theory", "p_empirical", "ci_lo",
                   "ci_hi",   "n_sets", "seed",     "trials",      "quadrature",
                   "version"};
  for (const auto& name : cfg.metrics) {
    for (std::size_t mi = 0; mi < cfg.dims.size(); ++mi) {
      const int m = cfg.dims[mi];
      ExperimentConfig sub = cfg;
      sub.metrics = {name};
      ClusteringScenario sc = scenario_of(sub, m);
      const auto law = asymptotic_law(sc.pair_system(), cfg.quad);
      const double p_theory = success_probability(law, sc);
      const double p_emp =
          empirical_success(sc, cfg.trials, EstimatorKind::Consistent,
                            derive_seed(cfg.seed, 0xC15, mi), threads);
      const double half = 3.0 * std::sqrt(std::max(p_emp * (1.0 - p_emp), 1e-12) /
                                          cfg.trials);
      table.add_row({name, fmt(m), fmt(p_theory), fmt(p_emp),
                     fmt(std::max(0.0, p_emp - half)),
                     fmt(std::min(1.0, p_emp + half)),
                     fmt(static_cast<int>(sc.models.size())), fmt(cfg.seed),
                     fmt(cfg.trials), quad_string(cfg.quad), kVersion});
    }
  }
  return table;
}

ResultTable run_asymptotics(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.kind != "asymptotics")
    throw config_error("run_asymptotics: wrong kind");
  ResultTable table;
  table.columns = {"metric", "M",    "N1",     "N2",        "d",
                   "mean",   "var",  "seed",   "trials",    "quadrature",
                   "version"};
  for (const auto& name : cfg.metrics) {
    const MetricSpec metric = metric_by_name(name);
    for (int m : cfg.dims) {
      const PairSetup setup = pair_setup(cfg, m);
      const auto law =
          asymptotic_law(pair_system_of(setup, metric, cfg.field), cfg.quad);
      table.add_row({name, fmt(m), fmt(setup.n1), fmt(setup.n2),
                     fmt(law.distance(0)), fmt(law.second_order_mean(0)),
                     fmt(law.covariance(0, 0)), fmt(cfg.seed), fmt(cfg.trials),
                     quad_string(cfg.quad), kVersion});
    }
  }
  return table;
}

namespace {

Eigen::MatrixXd load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error(path + ": cannot open observation file");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw config_error(path + ":" + std::to_string(lineno) +
                           ": invalid number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw config_error(path + ":" + std::to_string(lineno) +
                         ": ragged row width");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw config_error(path + ": empty matrix");
  Eigen::MatrixXd mat(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) mat(i, j) = rows[i][j];
  return mat;
}

}  // namespace

ResultTable run_estimate(const EstimateOptions& opts) {
  ResultTable table;
  table.columns = {"metric", "kind", "value", "M",        "N1",
                   "N2",     "seed", "quadrature", "version"};
  std::vector<std::string> names =
      opts.metric == "all" ? std::vector<std::string>{"eu", "kl", "le"}
                           : std::vector<std::string>{opts.metric};

  RealSpectrum s1, s2;
  const PopulationModel* m1 = nullptr;
  const PopulationModel* m2 = nullptr;
  PopulationModel model1(Eigen::MatrixXd::Identity(1, 1));
  PopulationModel model2(Eigen::MatrixXd::Identity(1, 1));
  if (!opts.y1_path.empty() || !opts.y2_path.empty()) {
    if (opts.y1_path.empty() || opts.y2_path.empty())
      throw config_error("estimate: both --y1 and --y2 are required");
    const Eigen::MatrixXd y1 = load_matrix_csv(opts.y1_path);
    const Eigen::MatrixXd y2 = load_matrix_csv(opts.y2_path);
    if (y1.rows() != y2.rows())
      throw config_error("estimate: observation files have mixed dimensions");
    SampleSet<double> set1{y1, opts.seed};
    SampleSet<double> set2{y2, opts.seed};
    s1 = scm_spectrum(set1);
    s2 = scm_spectrum(set2);
  } else {
    if (opts.dim < 1 || opts.n1 < 1 || opts.n2 < 1)
      throw config_error("estimate: --M, --N1, --N2 must be positive");
    if (!(std::fabs(opts.rho1) < 1.0) || !(std::fabs(opts.rho2) < 1.0))
      throw config_error("estimate: |rho| must be < 1");
    model1 = toeplitz_model(opts.rho1, opts.dim, opts.field);
    model2 = toeplitz_model(opts.rho2, opts.dim, opts.field);
    m1 = &model1;
    m2 = &model2;
    s1 = scm_spectrum(
        sample_gaussian(model1, opts.n1, derive_seed(opts.seed, 1, 0)));
    s2 = scm_spectrum(
        sample_gaussian(model2, opts.n2, derive_seed(opts.seed, 2, 0)));
  }

  for (const auto& name : names) {
    const MetricSpec metric = metric_by_name(name);
    const auto prov = [&](const char* kind, double value) {
      table.add_row({name, kind, fmt(value), fmt(s1.dim()),
                     fmt(s1.sample_count), fmt(s2.sample_count), fmt(opts.seed),
                     quad_string(opts.quad), kVersion});
    };
    if (m1 != nullptr) prov("true", true_distance(*m1, *m2, metric));
    prov("plugin", plugin_distance(s1, s2, metric).value);
    prov("consistent", consistent_distance(s1, s2, metric, opts.quad).value);
  }
  return table;
}

}  // namespace covdist
