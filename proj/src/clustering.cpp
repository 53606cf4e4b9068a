#include "covdist/clustering.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "covdist/parallel.hpp"
#include "covdist/rng.hpp"
#include "covdist/sampling.hpp"
#include "covdist/spectrum.hpp"
#include "covdist/stats.hpp"

namespace covdist {

std::vector<std::pair<int, int>> ClusteringScenario::all_pairs() const {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < set_count(); ++i)
    for (int j = i + 1; j < set_count(); ++j) pairs.emplace_back(i, j);
  return pairs;
}

std::vector<int> ClusteringScenario::intra_indices() const {
  std::vector<int> out;
  const auto pairs = all_pairs();
  for (std::size_t r = 0; r < pairs.size(); ++r)
    if (labels[pairs[r].first] == labels[pairs[r].second])
      out.push_back(static_cast<int>(r));
  return out;
}

std::vector<int> ClusteringScenario::inter_indices() const {
  std::vector<int> out;
  const auto pairs = all_pairs();
  for (std::size_t r = 0; r < pairs.size(); ++r)
    if (labels[pairs[r].first] != labels[pairs[r].second])
      out.push_back(static_cast<int>(r));
  return out;
}

PairSystem ClusteringScenario::pair_system() const {
  PairSystem sys;
  sys.models = models;
  sys.sample_counts = sample_counts;
  sys.pairs = all_pairs();
  sys.metric = metric;
  sys.field = field;
  return sys;
}

void ClusteringScenario::validate() const {
  if (set_count() < 4)
    throw domain_error("ClusteringScenario: needs at least 4 sets");
  if (models.size() != sample_counts.size() || models.size() != labels.size())
    throw domain_error("ClusteringScenario: inconsistent field lengths");
  for (int i = 0; i < set_count(); ++i)
    for (int j = i + 1; j < set_count(); ++j)
      if (labels[i] == labels[j] &&
          !models[i].same_population(models[j]))
        throw domain_error(
            "ClusteringScenario: intra-cluster pair links distinct covariances");
  if (intra_indices().empty() || inter_indices().empty())
    throw domain_error("ClusteringScenario: needs intra and inter pairs");
}

std::vector<SelectionMatrix> selection_matrices(const ClusteringScenario& s) {
  s.validate();
  const auto intra = s.intra_indices();
  const auto inter = s.inter_indices();
  const int r_total = static_cast<int>(s.all_pairs().size());
  std::vector<SelectionMatrix> out;
  out.reserve(intra.size());
  for (int top : intra) {
    SelectionMatrix sel;
    sel.rows = Eigen::MatrixXd::Zero(
        static_cast<int>(intra.size()) - 1 + static_cast<int>(inter.size()),
        r_total);
    int row = 0;
    for (int other : intra) {
      if (other == top) continue;
      sel.rows(row, other) = 1.0;   // d_other < d_top
      sel.rows(row, top) = -1.0;
      ++row;
    }
    for (int far : inter) {
      sel.rows(row, top) = 1.0;     // d_top < d_far
      sel.rows(row, far) = -1.0;
      ++row;
    }
    out.push_back(std::move(sel));
  }
  return out;
}

namespace {

// Genz-style reordering + Cholesky: at each stage pick the variable with the
// smallest conditional probability, then pivot it into place.
struct GenzFactor {
  Eigen::MatrixXd chol;   // lower triangular, reordered
  Eigen::VectorXd upper;  // reordered upper limits
};

GenzFactor genz_prepare(Eigen::MatrixXd cov, Eigen::VectorXd upper) {
  const int d = static_cast<int>(upper.size());
  // Floor tiny eigenvalues so selection-matrix rank deficiencies factor.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw numerical_error("mvn_orthant: eigendecomposition failed");
  const double floor = 1e-12 * std::max(cov.trace(), 1e-300);
  if (eig.eigenvalues()(0) < -floor)
    throw domain_error("mvn_orthant: covariance is not PSD");
  Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(floor);
  cov = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();

  GenzFactor out;
  out.chol = Eigen::MatrixXd::Zero(d, d);
  out.upper = upper;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < d; ++i) {
    // Select the remaining variable with the smallest conditional cdf.
    int best = -1;
    double best_p = 2.0;
    for (int j = i; j < d; ++j) {
      double resid = cov(j, j);
      double shift = 0.0;
      for (int k = 0; k < i; ++k) {
        resid -= out.chol(j, k) * out.chol(j, k);
        shift += out.chol(j, k) * y(k);
      }
      resid = std::max(resid, 1e-300);
      const double p = normal_cdf((out.upper(j) - shift) / std::sqrt(resid));
      if (p < best_p) {
        best_p = p;
        best = j;
      }
    }
    if (best != i) {
      cov.row(best).swap(cov.row(i));
      cov.col(best).swap(cov.col(i));
      out.chol.row(best).swap(out.chol.row(i));
      std::swap(out.upper(best), out.upper(i));
    }
    // Cholesky step.
    double resid = cov(i, i);
    double shift = 0.0;
    for (int k = 0; k < i; ++k) {
      resid -= out.chol(i, k) * out.chol(i, k);
      shift += out.chol(i, k) * y(k);
    }
    resid = std::max(resid, 1e-300);
    out.chol(i, i) = std::sqrt(resid);
    for (int j = i + 1; j < d; ++j) {
      double dot = cov(j, i);
      for (int k = 0; k < i; ++k) dot -= out.chol(j, k) * out.chol(i, k);
      out.chol(j, i) = dot / out.chol(i, i);
    }
    // Truncated expectation of the selected coordinate feeds the ordering
    // heuristic for later stages.
    const double b = (out.upper(i) - shift) / out.chol(i, i);
    const double cdf = std::max(normal_cdf(b), 1e-300);
    const double pdf = std::exp(-0.5 * b * b) * 0.39894228040143267794;
    y(i) = -pdf / cdf;
  }
  return out;
}

constexpr double kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,
                              37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79,
                              83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

}  // namespace

OrthantResult mvn_orthant(const Eigen::VectorXd& mean,
                          const Eigen::MatrixXd& cov,
                          const OrthantOptions& opts) {
  const int d = static_cast<int>(mean.size());
  if (cov.rows() != d || cov.cols() != d)
    throw domain_error("mvn_orthant: dimension mismatch");
  if (d == 0) throw domain_error("mvn_orthant: empty problem");
  if (d == 1) {
    const double sd = std::sqrt(std::max(cov(0, 0), 1e-300));
    return {normal_cdf(-mean(0) / sd), 0.0};
  }
  if (d > 32) throw domain_error("mvn_orthant: dimension above QMC table");

  const GenzFactor fac = genz_prepare(cov, -mean);
  Rng shift_rng(opts.seed);
  const int nshift = std::max(1, opts.randomizations);
  std::vector<double> estimates(nshift);
  Eigen::VectorXd lattice(d - 1);
  for (int k = 0; k < d - 1; ++k) lattice(k) = std::sqrt(kPrimes[k]);

  Eigen::VectorXd y(d - 1);
  for (int s = 0; s < nshift; ++s) {
    Eigen::VectorXd delta(d - 1);
    for (int k = 0; k < d - 1; ++k) delta(k) = shift_rng.uniform();
    double acc = 0.0;
    for (int i = 1; i <= opts.points; ++i) {
      // Richtmyer lattice point with random shift; walk the conditional
      // stages carrying the running shift L y.
      double f = 1.0;
      for (int k = 0; k < d; ++k) {
        double shift_ly = 0.0;
        for (int t = 0; t < k; ++t) shift_ly += fac.chol(k, t) * y(t);
        const double e =
            normal_cdf((fac.upper(k) - shift_ly) / fac.chol(k, k));
        f *= e;
        if (k < d - 1) {
          double u = lattice(k) * i + delta(k);
          u -= std::floor(u);
          const double v = std::min(std::max(u * e, 1e-16), 1.0 - 1e-16);
          y(k) = normal_quantile(v);
        }
      }
      acc += (f - acc) / static_cast<double>(i);
    }
    estimates[s] = acc;
  }
  OrthantResult out;
  out.probability = sample_mean(estimates);
  if (nshift > 1)
    out.std_error = std::sqrt(sample_variance(estimates) / nshift);
  return out;
}

double success_probability(const AsymptoticLaw& law,
                           const ClusteringScenario& scenario,
                           const OrthantOptions& opts) {
  scenario.validate();
  const auto pairs = scenario.all_pairs();
  if (law.distance.size() != static_cast<int>(pairs.size()))
    throw domain_error(
        "success_probability: law does not cover the scenario distance vector");
  const double m = law.dim;
  const Eigen::VectorXd mean_vec = law.distance + law.second_order_mean / m;
  const Eigen::MatrixXd cov = law.covariance / (m * m);

  double total = 0.0;
  OrthantOptions event_opts = opts;
  int event = 0;
  for (const auto& sel : selection_matrices(scenario)) {
    event_opts.seed = derive_seed(opts.seed, 0xC1u, static_cast<unsigned>(event++));
    const Eigen::VectorXd mu = sel.rows * mean_vec;
    const Eigen::MatrixXd sigma = sel.rows * cov * sel.rows.transpose();
    total += mvn_orthant(mu, sigma, event_opts).probability;
  }
  if (total > 1.0 + 3e-3)
    throw internal_consistency_error(
        "success_probability: disjoint-event sum exceeds 1 beyond budget");
  return std::min(total, 1.0);
}

namespace {

template <typename Scalar>
double run_trials(const ClusteringScenario& scenario, int trials,
                  EstimatorKind kind, std::uint64_t seed, int threads) {
  const auto pairs = scenario.all_pairs();
  const auto intra = scenario.intra_indices();
  const auto inter = scenario.inter_indices();
  std::vector<char> success(trials, 0);
  parallel_for(trials, threads, [&](int t) {
    std::vector<SampleSpectrum<Scalar>> spectra(scenario.set_count());
    for (int j = 0; j < scenario.set_count(); ++j) {
      const std::uint64_t s =
          derive_seed(seed, static_cast<unsigned>(j) + 1, static_cast<unsigned>(t));
      if constexpr (std::is_same_v<Scalar, double>)
        spectra[j] = scm_spectrum(
            sample_gaussian(scenario.models[j], scenario.sample_counts[j], s));
      else
        spectra[j] = scm_spectrum(sample_gaussian_complex(
            scenario.models[j], scenario.sample_counts[j], s));
    }
    Eigen::VectorXd dist(pairs.size());
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      const auto& [i, j] = pairs[r];
      dist(r) = kind == EstimatorKind::PlugIn
                    ? plugin_distance(spectra[i], spectra[j], scenario.metric).value
                    : consistent_distance(spectra[i], spectra[j], scenario.metric)
                          .value;
    }
    double max_intra = -std::numeric_limits<double>::infinity();
    for (int r : intra) max_intra = std::max(max_intra, dist(r));
    double min_inter = std::numeric_limits<double>::infinity();
    for (int r : inter) min_inter = std::min(min_inter, dist(r));
    success[t] = max_intra < min_inter ? 1 : 0;  // ties count as failure
  });
  double hits = 0.0;
  for (char c : success) hits += c;
  return hits / trials;
}

}  // namespace

double empirical_success(const ClusteringScenario& scenario, int trials,
                         EstimatorKind kind, std::uint64_t seed, int threads) {
  scenario.validate();
  if (trials < 1) throw domain_error("empirical_success: trials must be >= 1");
  if (kind != EstimatorKind::PlugIn && kind != EstimatorKind::Consistent)
    throw domain_error("empirical_success: estimator kind must be plug-in or consistent");
  return scenario.field == Field::Real
             ? run_trials<double>(scenario, trials, kind, seed, threads)
             : run_trials<std::complex<double>>(scenario, trials, kind, seed,
                                                threads);
}

}  // namespace covdist
