#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>

#include "covdist/population.hpp"
#include "covdist/rng.hpp"

namespace covdist {

/// One set of N observations of dimension M, stored as columns.
template <typename Scalar>
struct SampleSet {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> observations;
  std::uint64_t seed = 0;

  int dim() const { return static_cast<int>(observations.rows()); }
  int count() const { return static_cast<int>(observations.cols()); }
};

/// Y = R^{1/2} X with X standard real Gaussian; deterministic per seed.
inline SampleSet<double> sample_gaussian(const PopulationModel& model, int N,
                                         std::uint64_t seed) {
  if (N < 1) throw domain_error("sample_gaussian: N must be >= 1");
  Rng rng(seed);
  const int m = model.dim();
  Eigen::MatrixXd x(m, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < m; ++i) x(i, j) = rng.normal();
  SampleSet<double> out;
  out.observations = model.sqrt_covariance() * x;
  out.seed = seed;
  return out;
}

/// Y = R^{1/2} X with X circularly-symmetric complex Gaussian (real and
/// imaginary parts i.i.d. with variance 1/2); deterministic per seed.
inline SampleSet<std::complex<double>> sample_gaussian_complex(
    const PopulationModel& model, int N, std::uint64_t seed) {
  if (N < 1) throw domain_error("sample_gaussian_complex: N must be >= 1");
  Rng rng(seed);
  const int m = model.dim();
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  Eigen::MatrixXcd x(m, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < m; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      x(i, j) = std::complex<double>(re * kInvSqrt2, im * kInvSqrt2);
    }
  SampleSet<std::complex<double>> out;
  out.observations = model.sqrt_covariance() * x;
  out.seed = seed;
  return out;
}

}  // namespace covdist
