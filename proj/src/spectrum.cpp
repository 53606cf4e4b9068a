#include "covdist/spectrum.hpp"

#include <cmath>

namespace covdist {
namespace {

// Psi(mu) = (1/N) sum_k lambda_k / (lambda_k - mu); strictly increasing
// between consecutive poles.
double sample_stieltjes(const Eigen::VectorXd& lambda, int n, double mu) {
  double s = 0.0;
  for (int k = 0; k < lambda.size(); ++k) s += lambda(k) / (lambda(k) - mu);
  return s / static_cast<double>(n);
}

}  // namespace

Eigen::VectorXd mu_roots(const Eigen::VectorXd& lambda, int N) {
  const int m = static_cast<int>(lambda.size());
  if (N <= m)
    throw unsupported_regime_error("mu_roots: requires N > M (oversampled)");
  const double scale = lambda(m - 1);
  if (lambda(0) <= 0.0)
    throw degenerate_spectrum_error("mu_roots: eigenvalues must be positive");
  for (int k = 1; k < m; ++k)
    if (lambda(k) - lambda(k - 1) <= 1e-12 * scale)
      throw degenerate_spectrum_error(
          "mu_roots: sample eigenvalues tied beyond tolerance");

  Eigen::VectorXd mu(m);
  for (int k = 0; k < m; ++k) {
    // Bracket (lo, hi) = (lambda_{k-1}, lambda_k); Psi - 1 goes from
    // negative to +inf and is monotone increasing on the interval.
    double lo = k == 0 ? 0.0 : lambda(k - 1);
    double hi = lambda(k);
    const double width = hi - lo;
    double a = lo + 1e-15 * width;
    double b = hi;
    // Nudge the left endpoint until the sign straddles the root.
    double fa = sample_stieltjes(lambda, N, a) - 1.0;
    double eps = 1e-14 * width;
    while (fa >= 0.0 && eps < width) {
      a = lo + eps;
      fa = sample_stieltjes(lambda, N, a) - 1.0;
      eps *= 4.0;
    }
    if (fa >= 0.0)
      throw numerical_error("mu_roots: failed to bracket (left endpoint)");
    for (int it = 0; it < 200 && b - a > 1e-16 * scale; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      if (sample_stieltjes(lambda, N, mid) - 1.0 < 0.0)
        a = mid;
      else
        b = mid;
    }
    mu(k) = 0.5 * (a + b);
  }
  return mu;
}

}  // namespace covdist
