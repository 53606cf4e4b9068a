#pragma once

namespace covdist {

/// Real dilogarithm Li2(x) = -int_0^x log(1-y)/y dy for x <= 1.
/// Throws domain_error for x > 1.
double dilog(double x);

/// Piecewise dilogarithm combination used by the log-Euclidean estimator:
/// Li2(x) for 0 < x < 1, and pi^2/3 - log^2(x)/2 - Li2(1/x) for x >= 1.
/// Continuous at x = 1. Throws domain_error for x <= 0.
double phi2(double x);

}  // namespace covdist
