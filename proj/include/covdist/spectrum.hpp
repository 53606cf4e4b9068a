#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <complex>

#include "covdist/errors.hpp"
#include "covdist/sampling.hpp"

namespace covdist {

/// All M real roots of 1 = (1/N) sum_k lambda_k / (lambda_k - mu), ascending.
/// One root lies in each interval (lambda_{k-1}, lambda_k) with lambda_0 = 0.
/// Requires N > M and strictly positive, distinct eigenvalues.
Eigen::VectorXd mu_roots(const Eigen::VectorXd& lambda, int N);

/// Eigenvalues, eigenvectors and (when N > M) the interlacing mu roots of one
/// sample covariance matrix.
template <typename Scalar>
struct SampleSpectrum {
  Eigen::VectorXd eigenvalues;  // ascending, nonnegative
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> eigenvectors;
  int sample_count = 0;
  Eigen::VectorXd mu;  // empty unless oversampled

  int dim() const { return static_cast<int>(eigenvalues.size()); }
  bool oversampled() const { return sample_count > dim(); }
};

using RealSpectrum = SampleSpectrum<double>;
using ComplexSpectrum = SampleSpectrum<std::complex<double>>;

/// Spectrum of the SCM  R_hat = Y Y^H / N.
template <typename Scalar>
SampleSpectrum<Scalar> scm_spectrum(const SampleSet<Scalar>& data) {
  const int m = data.dim();
  const int n = data.count();
  if (!data.observations.allFinite())
    throw domain_error("scm_spectrum: observations must be finite");
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Mat scm =
      (data.observations * data.observations.adjoint()) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Mat> eig(scm);
  if (eig.info() != Eigen::Success)
    throw numerical_error("scm_spectrum: eigendecomposition failed");

  SampleSpectrum<Scalar> out;
  out.eigenvalues = eig.eigenvalues();
  out.eigenvectors = eig.eigenvectors();
  out.sample_count = n;

  // The SCM is positive semidefinite; clip roundoff-negative eigenvalues.
  const double floor = -1e-10 * std::max(1.0, out.eigenvalues(m - 1));
  for (int i = 0; i < m; ++i) {
    if (out.eigenvalues(i) < floor)
      throw numerical_error("scm_spectrum: negative eigenvalue beyond roundoff");
    if (out.eigenvalues(i) < 0.0) out.eigenvalues(i) = 0.0;
  }
  if (out.oversampled()) out.mu = mu_roots(out.eigenvalues, n);
  return out;
}

/// Builds a spectrum object directly from eigenvalues/eigenvectors (synthetic
/// inputs in tests, matrices loaded from disk, ...).
template <typename Scalar>
SampleSpectrum<Scalar> make_spectrum(
    Eigen::VectorXd eigenvalues,
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> eigenvectors, int n) {
  SampleSpectrum<Scalar> out;
  out.eigenvalues = std::move(eigenvalues);
  out.eigenvectors = std::move(eigenvectors);
  out.sample_count = n;
  if (out.oversampled()) out.mu = mu_roots(out.eigenvalues, n);
  return out;
}

}  // namespace covdist
