#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "covdist/contour.hpp"
#include "covdist/metric.hpp"
#include "covdist/population.hpp"
#include "covdist/specfun.hpp"
#include "covdist/spectrum.hpp"

namespace covdist {

enum class EstimatorKind { True, PlugIn, Consistent, ContourOracle };

struct DistanceEstimate {
  double value = 0.0;
  std::string metric;
  EstimatorKind kind = EstimatorKind::Consistent;
  int dim = 0;
  int n1 = 0;
  int n2 = 0;
};

/// Squared-magnitude Gram matrix |<e_k^{(1)}, e_m^{(2)}>|^2 .
template <typename S>
Eigen::MatrixXd eigenvector_gram(const SampleSpectrum<S>& s1,
                                 const SampleSpectrum<S>& s2) {
  return (s1.eigenvectors.adjoint() * s2.eigenvectors).cwiseAbs2();
}

namespace detail {

/// (1/M) sum_l f1(a)^T W f2(b) for the separable trace expansion.
inline double separable_trace(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                              const Eigen::MatrixXd& w, const MetricSpec& metric) {
  double total = 0.0;
  for (const auto& term : metric.terms) {
    Eigen::VectorXd fa(a.size()), fb(b.size());
    for (int i = 0; i < a.size(); ++i) fa(i) = term.f1.real_at(a(i));
    for (int i = 0; i < b.size(); ++i) fb(i) = term.f2.real_at(b(i));
    total += fa.dot(w * fb);
  }
  return total / static_cast<double>(a.size());
}

}  // namespace detail

/// d_M(1,2) evaluated on the true covariance matrices.
inline double true_distance(const PopulationModel& m1, const PopulationModel& m2,
                            const MetricSpec& metric) {
  if (m1.dim() != m2.dim())
    throw domain_error("true_distance: dimension mismatch");
  const Eigen::MatrixXd w =
      (m1.eigenvectors().transpose() * m2.eigenvectors()).cwiseAbs2();
  return detail::separable_trace(m1.eigenvalues(), m2.eigenvalues(), w, metric);
}

namespace detail {

template <typename S>
void require_regime(const SampleSpectrum<S>& s, const MetricSpec& metric,
                    const char* who) {
  if (metric.oversampled_only && !s.oversampled())
    throw unsupported_regime_error(std::string(who) +
                                   ": metric requires N > M (oversampled)");
}

}  // namespace detail

/// Plug-in estimator: the distance formula applied to the SCMs.
template <typename S>
DistanceEstimate plugin_distance(const SampleSpectrum<S>& s1,
                                 const SampleSpectrum<S>& s2,
                                 const MetricSpec& metric) {
  if (s1.dim() != s2.dim())
    throw domain_error("plugin_distance: dimension mismatch");
  detail::require_regime(s1, metric, "plugin_distance");
  detail::require_regime(s2, metric, "plugin_distance");
  const Eigen::MatrixXd w = eigenvector_gram(s1, s2);
  return {detail::separable_trace(s1.eigenvalues, s2.eigenvalues, w, metric),
          metric.name,
          EstimatorKind::PlugIn,
          s1.dim(),
          s1.sample_count,
          s2.sample_count};
}

/// Consistent Euclidean estimator,
/// (1/M) tr[(R1_hat - R2_hat)^2] - tr^2[R1_hat]/(M N1) - tr^2[R2_hat]/(M N2);
/// valid in both sampling regimes.
template <typename S>
DistanceEstimate consistent_euclidean(const SampleSpectrum<S>& s1,
                                      const SampleSpectrum<S>& s2) {
  if (s1.dim() != s2.dim())
    throw domain_error("consistent_euclidean: dimension mismatch");
  const double m = s1.dim();
  const Eigen::MatrixXd w = eigenvector_gram(s1, s2);
  const double cross =
      s1.eigenvalues.dot(w * s2.eigenvalues);
  const double tr_sq_diff = s1.eigenvalues.squaredNorm() +
                            s2.eigenvalues.squaredNorm() - 2.0 * cross;
  const double t1 = s1.eigenvalues.sum();
  const double t2 = s2.eigenvalues.sum();
  const double value = tr_sq_diff / m - t1 * t1 / (m * s1.sample_count) -
                       t2 * t2 / (m * s2.sample_count);
  return {value, "eu", EstimatorKind::Consistent,
          s1.dim(), s1.sample_count, s2.sample_count};
}

/// Consistent symmetrized-KL estimator (oversampled only).
template <typename S>
DistanceEstimate consistent_kl(const SampleSpectrum<S>& s1,
                               const SampleSpectrum<S>& s2) {
  if (s1.dim() != s2.dim())
    throw domain_error("consistent_kl: dimension mismatch");
  if (!s1.oversampled() || !s2.oversampled())
    throw unsupported_regime_error("consistent_kl: requires N1 > M and N2 > M");
  const double m = s1.dim();
  const Eigen::MatrixXd w = eigenvector_gram(s1, s2);
  double tr12 = 0.0;  // tr[R1_hat^{-1} R2_hat]
  double tr21 = 0.0;  // tr[R2_hat^{-1} R1_hat]
  for (int k = 0; k < s1.dim(); ++k)
    for (int j = 0; j < s2.dim(); ++j) {
      tr12 += w(k, j) * s2.eigenvalues(j) / s1.eigenvalues(k);
      tr21 += w(k, j) * s1.eigenvalues(k) / s2.eigenvalues(j);
    }
  const double c1 = m / s1.sample_count;
  const double c2 = m / s2.sample_count;
  const double value =
      (1.0 - c1) * tr12 / (2.0 * m) + (1.0 - c2) * tr21 / (2.0 * m) - 1.0;
  return {value, "kl", EstimatorKind::Consistent,
          s1.dim(), s1.sample_count, s2.sample_count};
}

/// Coefficients beta_k of the log estimator of mestre-style spectral sums:
/// the closed form of (1/2pi i) oint log(omega_hat) (z omega_hat'/omega_hat)
/// Q_hat(z) dz projected on the sample eigenvectors.
template <typename S>
Eigen::VectorXd le_beta(const SampleSpectrum<S>& s) {
  if (!s.oversampled())
    throw unsupported_regime_error("le_beta: requires N > M (oversampled)");
  const int m = s.dim();
  const Eigen::VectorXd& lam = s.eigenvalues;
  const Eigen::VectorXd& mu = s.mu;
  Eigen::VectorXd beta(m);
  for (int k = 0; k < m; ++k) {
    double factor = 1.0;
    for (int r = 0; r < m; ++r) {
      if (r != k) factor += lam(k) / (lam(r) - lam(k));
      factor -= mu(k) / (lam(r) - mu(k));
    }
    double sum = factor * std::log(lam(k)) + 1.0;
    for (int r = 0; r < m; ++r) {
      if (r != k)
        sum += lam(r) / (lam(r) - lam(k)) * std::log(lam(r));
      sum -= mu(r) / (mu(r) - lam(k)) * std::log(mu(r));
    }
    beta(k) = sum;
  }
  return beta;
}

/// alpha term of the consistent log-Euclidean estimator: the closed form of
/// the log^2 spectral sum, combining the mu roots, the sample eigenvalues and
/// the piecewise dilogarithm phi2.
template <typename S>
double le_alpha(const SampleSpectrum<S>& s) {
  if (!s.oversampled())
    throw unsupported_regime_error("le_alpha: requires N > M (oversampled)");
  const int m = s.dim();
  const double n = s.sample_count;
  const double ratio = n / m;  // N/M
  const Eigen::VectorXd& lam = s.eigenvalues;
  const Eigen::VectorXd& mu = s.mu;

  double alpha = 0.0;
  for (int r = 0; r < m; ++r) {
    const double a = 1.0 + std::log(mu(r));
    const double b = 1.0 + std::log(lam(r));
    alpha += (ratio - 1.0) * (a * a - b * b);
  }
  for (int k = 0; k < m; ++k) {
    const double b = 1.0 + std::log(lam(k));
    alpha += b * b / m;
  }
  const double log_def = std::log(1.0 - m / n);
  alpha += -(ratio - 1.0) * log_def * log_def + 1.0;

  for (int k = 0; k < m; ++k) {
    for (int r = 0; r < m; ++r)
      alpha += 2.0 / m * (phi2(mu(r) / lam(k)) - phi2(lam(r) / lam(k)));
    double inner = 0.0;
    for (int r = 0; r < m; ++r) {
      if (r != k)
        inner += std::log(lam(r) / lam(k)) *
                 std::log(lam(k) / std::fabs(lam(k) - lam(r)));
      inner -= std::log(mu(r) / lam(k)) *
               std::log(lam(k) / std::fabs(lam(k) - mu(r)));
    }
    alpha += 2.0 / m * inner;
  }
  return alpha;
}

/// Consistent log-Euclidean estimator,
/// alpha^(1) + alpha^(2) - (2/M) sum_{k,m} beta_k^(1) beta_m^(2) |<e_k, e_m>|^2.
template <typename S>
DistanceEstimate consistent_le(const SampleSpectrum<S>& s1,
                               const SampleSpectrum<S>& s2) {
  if (s1.dim() != s2.dim())
    throw domain_error("consistent_le: dimension mismatch");
  if (!s1.oversampled() || !s2.oversampled())
    throw unsupported_regime_error("consistent_le: requires N1 > M and N2 > M");
  const Eigen::MatrixXd w = eigenvector_gram(s1, s2);
  const Eigen::VectorXd b1 = le_beta(s1);
  const Eigen::VectorXd b2 = le_beta(s2);
  const double value = le_alpha(s1) + le_alpha(s2) -
                       2.0 / s1.dim() * b1.dot(w * b2);
  return {value, "le", EstimatorKind::Consistent,
          s1.dim(), s1.sample_count, s2.sample_count};
}

/// omega_hat(z) and its derivative: the sample estimator of the
/// deterministic-equivalent change of variables.
template <typename S>
std::pair<std::complex<double>, std::complex<double>> omega_hat(
    const SampleSpectrum<S>& s, std::complex<double> z) {
  const int m = s.dim();
  const double n = s.sample_count;
  std::complex<double> psi{0.0, 0.0};   // (1/N) tr[R_hat Q_hat]
  std::complex<double> q2{0.0, 0.0};    // tr[Q_hat^2]
  const double scale = std::max(1.0, s.eigenvalues(m - 1));
  for (int k = 0; k < m; ++k) {
    const std::complex<double> d = s.eigenvalues(k) - z;
    if (std::abs(d) < 1e-14 * scale)
      throw singular_evaluation_error("omega_hat: z hits a sample eigenvalue");
    psi += s.eigenvalues(k) / d;
    q2 += 1.0 / (d * d);
  }
  psi /= n;
  const std::complex<double> denom = 1.0 - psi;
  if (std::abs(denom) < 1e-14)
    throw singular_evaluation_error("omega_hat: 1 - (1/N) tr[R Q] vanished");
  const std::complex<double> w = z / denom;
  const std::complex<double> wp =
      (1.0 - m / n + z * z * q2 / n) / (denom * denom);
  return {w, wp};
}

/// Default sampling-domain contour: an ellipse whose real extent encloses the
/// sample eigenvalues and mu roots. Oversampled spectra keep zero outside;
/// the undersampled (Euclidean-only) contour encloses zero.
template <typename S>
Contour default_sample_contour(const SampleSpectrum<S>& s,
                               const MetricSpec& metric, int nodes) {
  const int m = s.dim();
  const double top = 2.0 * s.eigenvalues(m - 1);
  Contour c;
  if (s.oversampled()) {
    const double bottom = 0.5 * std::min(s.eigenvalues(0), s.mu(0));
    c = make_ellipse(bottom, top, 0.5, nodes);
  } else {
    if (metric.oversampled_only)
      throw unsupported_regime_error(
          "default_sample_contour: metric requires N > M");
    c = make_ellipse(-0.5 * s.eigenvalues(m - 1), top, 0.5, nodes);
  }
  validate_contour(c, metric.mu_inf());
  return c;
}

namespace detail {

/// Per-eigenvalue single-contour weights
///   a_k = (1/2pi i) oint f(omega_hat(z)) (z omega_hat'/omega_hat)
///         / (lambda_k - z) dz,
/// the building block of the generic double-contour estimator: the trace
/// kernel tr[Q1 Q2] separates over eigenvalue pairs, so the double integral
/// is the Gram-weighted product of these vectors.
template <typename S>
Eigen::VectorXcd contour_eigen_weights(const SampleSpectrum<S>& s,
                                       const AnalyticFn& f, const Contour& c) {
  const int m = s.dim();
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(m);
  for (int q = 0; q < c.nodes; ++q) {
    const std::complex<double> z = c.point(q);
    const auto [w, wp] = omega_hat(s, z);
    const std::complex<double> h = f.value(w) * z * wp / w;
    const std::complex<double> jac =
        c.tangent(q) / std::complex<double>(0.0, static_cast<double>(c.nodes));
    for (int k = 0; k < m; ++k)
      acc(k) += h / (s.eigenvalues(k) - z) * jac;
  }
  return acc;
}

}  // namespace detail

/// Generic consistent estimator by double-contour quadrature, usable with any
/// metric satisfying the analyticity assumption; serves as the oracle the
/// closed forms are checked against.
template <typename S>
DistanceEstimate generic_contour_estimator(
    const SampleSpectrum<S>& s1, const SampleSpectrum<S>& s2,
    const MetricSpec& metric,
    const std::vector<std::pair<Contour, Contour>>& contours,
    const QuadratureOptions& quad = {}) {
  if (s1.dim() != s2.dim())
    throw domain_error("generic_contour_estimator: dimension mismatch");
  detail::require_regime(s1, metric, "generic_contour_estimator");
  detail::require_regime(s2, metric, "generic_contour_estimator");
  if (contours.size() != metric.terms.size())
    throw domain_error("generic_contour_estimator: one contour pair per term");
  const Eigen::MatrixXd w = eigenvector_gram(s1, s2);
  const double m = s1.dim();

  double total = 0.0;
  for (std::size_t l = 0; l < metric.terms.size(); ++l) {
    const auto& term = metric.terms[l];
    validate_contour(contours[l].first, term.f1.mu_inf);
    validate_contour(contours[l].second, term.f2.mu_inf);
    double prev = 0.0;
    bool have_prev = false;
    bool converged = false;
    for (int q = quad.initial_nodes; q <= quad.max_nodes; q *= 2) {
      const Eigen::VectorXcd a = detail::contour_eigen_weights(
          s1, term.f1, contours[l].first.with_nodes(q));
      const Eigen::VectorXcd b = detail::contour_eigen_weights(
          s2, term.f2, contours[l].second.with_nodes(q));
      const std::complex<double> bilinear =
          a.transpose() * w.cast<std::complex<double>>() * b;
      const double v = bilinear.real() / m;
      if (have_prev &&
          std::fabs(v - prev) <= quad.rel_tol * std::max(1.0, std::fabs(v))) {
        prev = v;
        converged = true;
        break;
      }
      prev = v;
      have_prev = true;
    }
    if (!converged)
      throw numerical_error(
          "generic_contour_estimator: quadrature did not converge");
    total += prev;
  }
  return {total, metric.name, EstimatorKind::ContourOracle,
          s1.dim(), s1.sample_count, s2.sample_count};
}

/// Convenience overload: default contours, one pair per term.
template <typename S>
DistanceEstimate generic_contour_estimator(const SampleSpectrum<S>& s1,
                                           const SampleSpectrum<S>& s2,
                                           const MetricSpec& metric,
                                           const QuadratureOptions& quad = {}) {
  std::vector<std::pair<Contour, Contour>> contours;
  contours.reserve(metric.terms.size());
  for (std::size_t l = 0; l < metric.terms.size(); ++l)
    contours.emplace_back(
        default_sample_contour(s1, metric, quad.initial_nodes),
        default_sample_contour(s2, metric, quad.initial_nodes));
  return generic_contour_estimator(s1, s2, metric, contours, quad);
}

/// Dispatch to the closed-form consistent estimator of a builtin metric;
/// custom metrics go through the contour quadrature.
template <typename S>
DistanceEstimate consistent_distance(const SampleSpectrum<S>& s1,
                                     const SampleSpectrum<S>& s2,
                                     const MetricSpec& metric,
                                     const QuadratureOptions& quad = {}) {
  switch (metric.id) {
    case MetricId::Euclidean:
      return consistent_euclidean(s1, s2);
    case MetricId::SymKL:
      return consistent_kl(s1, s2);
    case MetricId::LogEuclidean:
      return consistent_le(s1, s2);
    case MetricId::Custom:
      break;
  }
  return generic_contour_estimator(s1, s2, metric, quad);
}

}  // namespace covdist
