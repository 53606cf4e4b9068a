#pragma once

#include <Eigen/Dense>
#include <complex>

#include "covdist/population.hpp"

namespace covdist {

/// Gamma_j(w, w2) = (1/N) tr[R^2 Q(w) Q(w2)], evaluated through the atoms as
/// sum_m K_m gamma_m^2 / ((gamma_m - w)(gamma_m - w2)).
std::complex<double> gamma_fn(const PopulationModel& model, int N,
                              std::complex<double> w);
std::complex<double> gamma_fn(const PopulationModel& model, int N,
                              std::complex<double> w, std::complex<double> w2);

/// z'(w) = 1 - Gamma(w, w) and its derivative z''(w).
std::complex<double> z_prime(const PopulationModel& model, int N,
                             std::complex<double> w);
std::complex<double> z_second(const PopulationModel& model, int N,
                              std::complex<double> w);

/// All 2*Mbar real solutions of Gamma(w) = 1, ascending. Throws
/// cluster_overlap_error when an interior interval carries no real pair
/// (overlapping clusters) and surfaces double roots as errors as well.
Eigen::VectorXd theta_roots(const PopulationModel& model, int N);

/// All 2*Mbar zeros of z'(w) = 1 - Gamma(w) in the complex plane, via a
/// balanced linearization of the quadratic eigenproblem (D - wI)^2 = u u^T
/// plus Newton polish. Complex zeros appear in conjugate pairs whenever the
/// sample-support clusters merge; the outermost two zeros are always real.
Eigen::VectorXcd z_prime_zeros(const PopulationModel& model, int N);

/// The Mbar solutions in phi of Gamma(w, phi) = 1 for fixed w, via the
/// eigenvalues of the rank-one companion form of the denominator-cleared
/// polynomial, polished by Newton steps.
Eigen::VectorXcd phi_roots(const PopulationModel& model, int N,
                           std::complex<double> w);

}  // namespace covdist
