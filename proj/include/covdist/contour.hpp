#pragma once
#include <cmath>

#include <complex>
#include <limits>

#include "covdist/errors.hpp"

namespace covdist {

/// Node-doubling schedule shared by every contour quadrature in the library.
struct QuadratureOptions {
  int initial_nodes = 256;
  int max_nodes = 4096;
  double rel_tol = 1e-8;
};

/// Negatively (clockwise) oriented closed contour, the orientation every
/// contour integral here assumes:
/// (1/2pi i) * contour_integral( f / (a - w) dw ) = f(a) for a inside.
///
/// Linear kind: an ellipse in the plane. Log kind: the exp image of an
/// ellipse drawn in log coordinates, which distributes nodes log-uniformly
/// and keeps spectral convergence when the enclosed poles span decades.
struct Contour {
  enum class Kind { Linear, Log };

  Kind kind = Kind::Linear;
  double center = 0.0;  // in log coordinates for the Log kind
  double semi_x = 1.0;
  double semi_y = 0.5;
  int nodes = 256;

  std::complex<double> point(int q) const {
    const double t = 6.283185307179586476925286766559 * q / nodes;
    const std::complex<double> s{center + semi_x * std::cos(t),
                                 -semi_y * std::sin(t)};
    return kind == Kind::Linear ? s : std::exp(s);
  }

  std::complex<double> tangent(int q) const {
    const double t = 6.283185307179586476925286766559 * q / nodes;
    const std::complex<double> ds{-semi_x * std::sin(t), -semi_y * std::cos(t)};
    if (kind == Kind::Linear) return ds;
    const std::complex<double> s{center + semi_x * std::cos(t),
                                 -semi_y * std::sin(t)};
    return std::exp(s) * ds;
  }

  Contour with_nodes(int q) const {
    Contour c = *this;
    c.nodes = q;
    return c;
  }

  Contour dilated(double factor) const {
    Contour c = *this;
    c.semi_x *= factor;
    c.semi_y *= factor;
    return c;
  }
};

/// Ellipse with real extent [lo, hi]; the imaginary semi-axis is
/// aspect * (hi - lo) / 2.
inline Contour make_ellipse(double lo, double hi, double aspect, int nodes) {
  if (!(hi > lo)) throw numerical_error("make_ellipse: empty real extent");
  Contour c;
  c.center = 0.5 * (lo + hi);
  c.semi_x = 0.5 * (hi - lo);
  c.semi_y = aspect * c.semi_x;
  c.nodes = nodes;
  return c;
}

/// exp image of an ellipse over [log lo, log hi]; requires lo > 0. The
/// angular semi-axis is capped below pi so the image never crosses
/// (-inf, 0].
inline Contour make_log_ellipse(double lo, double hi, double angle,
                                int nodes) {
  if (!(lo > 0.0) || !(hi > lo))
    throw numerical_error("make_log_ellipse: need 0 < lo < hi");
  if (!(angle > 0.0) || angle >= 3.0)
    throw numerical_error("make_log_ellipse: angular semi-axis out of range");
  Contour c;
  c.kind = Contour::Kind::Log;
  c.center = 0.5 * (std::log(lo) + std::log(hi));
  c.semi_x = 0.5 * (std::log(hi) - std::log(lo));
  c.semi_y = angle;
  c.nodes = nodes;
  return c;
}

/// Verifies the analyticity constraint: the contour must not reach into
/// (-inf, mu_inf], and its node count must be even and at least 64.
inline void validate_contour(const Contour& c, double mu_inf) {
  if (c.nodes < 64 || c.nodes % 2 != 0)
    throw numerical_error("contour: node count must be even and >= 64");
  if (c.kind == Contour::Kind::Log) {
    if (c.semi_y >= 3.0)
      throw numerical_error("contour: log ellipse reaches the negative axis");
    if (mu_inf > 0.0)
      throw numerical_error("contour: log ellipse cannot exclude mu_inf > 0");
    return;
  }
  if (mu_inf > -std::numeric_limits<double>::infinity() &&
      c.center - c.semi_x <= mu_inf)
    throw numerical_error(
        "contour: ellipse intersects the excluded ray (-inf, mu_inf]");
}

/// (1/2pi i) * closed contour integral, trapezoidal rule on the ellipse nodes.
template <class F>
std::complex<double> contour_integral(const Contour& c, F&& integrand) {
  std::complex<double> acc{0.0, 0.0};
  for (int q = 0; q < c.nodes; ++q)
    acc += integrand(c.point(q)) * c.tangent(q);
  return acc / std::complex<double>(0.0, static_cast<double>(c.nodes));
}

}  // namespace covdist
