#pragma once

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

#include "covdist/contour.hpp"
#include "covdist/metric.hpp"
#include "covdist/population.hpp"
#include "covdist/roots.hpp"

namespace covdist {

/// A collection of observation sets and the R distance pairs whose joint
/// Gaussian fluctuations are being described.
struct PairSystem {
  std::vector<PopulationModel> models;    // indexed by the set index, 0-based
  std::vector<int> sample_counts;         // N_j per set
  std::vector<std::pair<int, int>> pairs; // (i_r, j_r), i_r != j_r
  MetricSpec metric;
  Field field = Field::Real;

  int dim() const { return models.empty() ? 0 : models.front().dim(); }
  void validate() const;
};

/// Second-order descriptors of M (d_hat - d): true distances, asymptotic mean
/// vector and covariance matrix.
struct AsymptoticLaw {
  Eigen::VectorXd distance;
  Eigen::VectorXd second_order_mean;
  Eigen::MatrixXd covariance;
  int dim = 0;
};

/// Closed-form second-order means per pair.
Eigen::VectorXd mean_euclidean(const PairSystem& system);
Eigen::VectorXd mean_kl(const PairSystem& system);

/// Log-Euclidean mean: eigenprojection terms plus residues at the zeros of
/// z'(w). When sample-support clusters merge, part of those zeros form
/// conjugate pairs; the residue sum runs over all of them and stays real.
Eigen::VectorXd mean_le(const PairSystem& system);

/// Numerical contour quadrature of the generic second-order mean; validates
/// the closed forms and serves metrics without one.
Eigen::VectorXd mean_generic_oracle(const PairSystem& system,
                                    const QuadratureOptions& quad = {});

/// Closed-form asymptotic (co)variances. Defined for systems whose pairs are
/// index-disjoint (off-diagonal couplings vanish identically); coupled pairs
/// need var_general.
Eigen::MatrixXd var_euclidean(const PairSystem& system);
Eigen::MatrixXd var_kl(const PairSystem& system);

/// Single-pair closed forms.
double var_euclidean_pair(const PopulationModel& m1, int n1,
                          const PopulationModel& m2, int n2, Field field);
double var_kl_pair(const PopulationModel& m1, int n1, const PopulationModel& m2,
                   int n2, Field field);

/// The two single-contour integrals of the variance reduction for atom pair
/// (k, r): curly-I and curly-I-tilde, with f attached to the omega variable
/// and g to the omega-tilde variable.
std::pair<std::complex<double>, std::complex<double>> cal_I(
    const PopulationModel& model, int N, const AnalyticFn& f,
    const AnalyticFn& g, int k, int r, const QuadratureOptions& quad = {});

/// Full R x R asymptotic covariance through the single-integral reduction;
/// works for any metric satisfying the analyticity assumption and any pair
/// coupling pattern.
Eigen::MatrixXd var_general(const PairSystem& system,
                            const QuadratureOptions& quad = {});

/// Composes true distances, the second-order mean and the covariance,
/// dispatching to closed forms where available.
AsymptoticLaw asymptotic_law(const PairSystem& system,
                             const QuadratureOptions& quad = {});

}  // namespace covdist
