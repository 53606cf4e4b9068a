#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "covdist/errors.hpp"

namespace covdist {

/// Scalar analytic function with value and first derivative, declared
/// analytic on C \ (-inf, mu_inf].
struct AnalyticFn {
  std::function<std::complex<double>(std::complex<double>)> value;
  std::function<std::complex<double>(std::complex<double>)> deriv;
  double mu_inf = -std::numeric_limits<double>::infinity();

  double real_at(double x) const { return value(std::complex<double>(x)).real(); }
};

/// One term f_1 x f_2 of the separable trace expansion of a distance.
struct MetricTerm {
  AnalyticFn f1;
  AnalyticFn f2;
};

enum class MetricId { Euclidean, SymKL, LogEuclidean, Custom };

/// A distance d(1,2) = (1/M) sum_l tr[f_1^{(l)}(R_1) f_2^{(l)}(R_2)].
struct MetricSpec {
  MetricId id = MetricId::Custom;
  std::string name = "custom";
  std::vector<MetricTerm> terms;
  bool oversampled_only = false;

  double mu_inf() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& t : terms) {
      m = std::max(m, t.f1.mu_inf);
      m = std::max(m, t.f2.mu_inf);
    }
    return m;
  }
};

namespace fns {

/// Guard for principal-branch evaluations: distance from (-inf, 0] must
/// exceed 1e-8.
inline void check_branch(std::complex<double> w) {
  const double dist = w.real() > 0.0 ? std::abs(w) : std::abs(w.imag());
  if (dist <= 1e-8)
    throw numerical_error("analytic function argument within 1e-8 of (-inf, 0]");
}

inline AnalyticFn constant(double c) {
  return {[c](std::complex<double>) { return std::complex<double>(c); },
          [](std::complex<double>) { return std::complex<double>(0.0); },
          -std::numeric_limits<double>::infinity()};
}

inline AnalyticFn identity(double scale = 1.0) {
  return {[scale](std::complex<double> w) { return scale * w; },
          [scale](std::complex<double>) { return std::complex<double>(scale); },
          -std::numeric_limits<double>::infinity()};
}

inline AnalyticFn square() {
  return {[](std::complex<double> w) { return w * w; },
          [](std::complex<double> w) { return 2.0 * w; },
          -std::numeric_limits<double>::infinity()};
}

inline AnalyticFn inverse(double scale = 1.0) {
  return {[scale](std::complex<double> w) {
            check_branch(w);
            return scale / w;
          },
          [scale](std::complex<double> w) {
            check_branch(w);
            return -scale / (w * w);
          },
          0.0};
}

inline AnalyticFn log(double scale = 1.0) {
  return {[scale](std::complex<double> w) {
            check_branch(w);
            return scale * std::log(w);
          },
          [scale](std::complex<double> w) {
            check_branch(w);
            return scale / w;
          },
          0.0};
}

inline AnalyticFn log_squared() {
  return {[](std::complex<double> w) {
            check_branch(w);
            const auto l = std::log(w);
            return l * l;
          },
          [](std::complex<double> w) {
            check_branch(w);
            return 2.0 * std::log(w) / w;
          },
          0.0};
}

}  // namespace fns

/// (w1 - w2)^2 expanded as w1^2 - 2 w1 w2 + w2^2.
MetricSpec euclidean_metric();

/// Jeffreys divergence: w2/(2 w1) + w1/(2 w2) - 1. Oversampled only.
MetricSpec sym_kl_metric();

/// (log w1 - log w2)^2 expanded as log^2 w1 - 2 log w1 log w2 + log^2 w2.
/// Oversampled only.
MetricSpec log_euclidean_metric();

/// Lookup by short name: "eu" | "kl" | "le".
MetricSpec metric_by_name(const std::string& name);

}  // namespace covdist
