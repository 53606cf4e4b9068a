#include "covdist/specfun.hpp"

#include <cmath>

#include "covdist/errors.hpp"

namespace covdist {
namespace {

constexpr double kPiSqOver6 = 1.6449340668482264364724151666460;

// Power series sum_{k>=1} x^k / k^2, convergent and fast for |x| <= 0.5.
double dilog_series(double x) {
  double term = x;
  double sum = x;
  for (int k = 2; k < 200; ++k) {
    term *= x;
    const double add = term / static_cast<double>(k) / static_cast<double>(k);
    sum += add;
    if (std::fabs(add) < 1e-18 * (1.0 + std::fabs(sum))) break;
  }
  return sum;
}

}  // namespace

double dilog(double x) {
  if (x > 1.0) throw domain_error("dilog: argument must satisfy x <= 1");
  if (x == 1.0) return kPiSqOver6;
  if (x == 0.0) return 0.0;
  if (x < -1.0) {
    // Inversion: Li2(x) = -Li2(1/x) - pi^2/6 - log^2(-x)/2, with 1/x in (-1,0).
    const double l = std::log(-x);
    return -dilog(1.0 / x) - kPiSqOver6 - 0.5 * l * l;
  }
  if (x < -0.5) {
    // Landen: Li2(x) = -Li2(x/(x-1)) - log^2(1-x)/2, with x/(x-1) in (1/3,1/2].
    const double l = std::log1p(-x);
    return -dilog_series(x / (x - 1.0)) - 0.5 * l * l;
  }
  if (x <= 0.5) return dilog_series(x);
  // Reflection: Li2(x) = pi^2/6 - log(x)log(1-x) - Li2(1-x), 1-x in [0, 0.5).
  return kPiSqOver6 - std::log(x) * std::log1p(-x) - dilog_series(1.0 - x);
}

double phi2(double x) {
  if (x <= 0.0) throw domain_error("phi2: argument must be positive");
  if (x < 1.0) return dilog(x);
  const double l = std::log(x);
  return 2.0 * kPiSqOver6 - 0.5 * l * l - dilog(1.0 / x);
}

}  // namespace covdist
