#include "covdist/roots.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "covdist/errors.hpp"

namespace covdist {

namespace {

using Complex = std::complex<double>;

void check_off_poles(const PopulationModel& model, Complex w) {
  for (int m = 0; m < model.num_atoms(); ++m)
    if (std::abs(w - model.atom_value(m)) < 1e-12 * model.atom_value(m))
      throw singular_evaluation_error("evaluation at a population eigenvalue");
}

// Gamma restricted to the real axis, plus first derivative.
double gamma_real(const PopulationModel& model, int N, double w) {
  double s = 0.0;
  for (int m = 0; m < model.num_atoms(); ++m) {
    const double g = model.atom_value(m);
    const double d = g - w;
    s += model.atom_multiplicity(m) * g * g / (d * d);
  }
  return s / N;
}

double gamma_real_deriv(const PopulationModel& model, int N, double w) {
  double s = 0.0;
  for (int m = 0; m < model.num_atoms(); ++m) {
    const double g = model.atom_value(m);
    const double d = g - w;
    s += 2.0 * model.atom_multiplicity(m) * g * g / (d * d * d);
  }
  return s / N;
}

// Bisection for Gamma(w) = 1 on (a, b) where Gamma - 1 changes sign once and
// is monotone; `increasing` tells the sign pattern.
double bisect_gamma(const PopulationModel& model, int N, double a, double b,
                    bool increasing) {
  const double tol = 1e-15 * std::max({1.0, std::fabs(a), std::fabs(b)});
  for (int it = 0; it < 200 && b - a > tol; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    const bool below = gamma_real(model, N, mid) < 1.0;
    if (below == increasing)
      a = mid;
    else
      b = mid;
  }
  double root = 0.5 * (a + b);
  // Newton polish; Gamma' is well-behaved away from the atoms.
  for (int it = 0; it < 2; ++it) {
    const double gp = gamma_real_deriv(model, N, root);
    if (gp == 0.0) break;
    const double step = (gamma_real(model, N, root) - 1.0) / gp;
    if (!std::isfinite(step)) break;
    const double next = root - step;
    if (next <= a || next >= b) break;
    root = next;
  }
  return root;
}

}  // namespace

std::complex<double> gamma_fn(const PopulationModel& model, int N, Complex w) {
  return gamma_fn(model, N, w, w);
}

std::complex<double> gamma_fn(const PopulationModel& model, int N, Complex w,
                              Complex w2) {
  check_off_poles(model, w);
  check_off_poles(model, w2);
  Complex s{0.0, 0.0};
  for (int m = 0; m < model.num_atoms(); ++m) {
    const double g = model.atom_value(m);
    s += static_cast<double>(model.atom_multiplicity(m)) * g * g /
         ((g - w) * (g - w2));
  }
  return s / static_cast<double>(N);
}

std::complex<double> z_prime(const PopulationModel& model, int N, Complex w) {
  return 1.0 - gamma_fn(model, N, w, w);
}

std::complex<double> z_second(const PopulationModel& model, int N, Complex w) {
  check_off_poles(model, w);
  Complex s{0.0, 0.0};
  for (int m = 0; m < model.num_atoms(); ++m) {
    const double g = model.atom_value(m);
    const Complex d = g - w;
    s += static_cast<double>(model.atom_multiplicity(m)) * g * g / (d * d * d);
  }
  return -2.0 * s / static_cast<double>(N);
}

Eigen::VectorXd theta_roots(const PopulationModel& model, int N) {
  const int mbar = model.num_atoms();
  const Eigen::VectorXd& gamma = model.atom_values();
  std::vector<double> roots;
  roots.reserve(2 * mbar);

  // Outermost intervals: Gamma decays to 0 at +-infinity and blows up at the
  // extreme atoms, so each side carries exactly one root.
  {
    double step = std::max(gamma(mbar - 1) - gamma(0), gamma(0));
    double lo = gamma(0) - step;
    while (gamma_real(model, N, lo) >= 1.0) {
      step *= 2.0;
      lo = gamma(0) - step;
    }
    const double hi = gamma(0) * (1.0 - 1e-14);
    roots.push_back(bisect_gamma(model, N, lo, hi, true));
  }

  // Interior intervals (gamma_m, gamma_{m+1}): Gamma is convex with +inf at
  // both ends; locate its minimum through the monotone derivative, then
  // bisect on both sides when the minimum dips below 1.
  for (int m = 0; m + 1 < mbar; ++m) {
    double a = gamma(m) * (1.0 + 1e-14);
    double b = gamma(m + 1) * (1.0 - 1e-14);
    double lo = a, hi = b;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (gamma(m + 1) - gamma(m));
         ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (gamma_real_deriv(model, N, mid) < 0.0)
        lo = mid;
      else
        hi = mid;
    }
    const double wmin = 0.5 * (lo + hi);
    const double gmin = gamma_real(model, N, wmin);
    if (gmin >= 1.0 - 1e-12)
      throw cluster_overlap_error(
          "theta_roots: interior interval carries no simple real pair "
          "(cluster overlap or double root)");
    roots.push_back(bisect_gamma(model, N, a, wmin, false));
    roots.push_back(bisect_gamma(model, N, wmin, b, true));
  }

  {
    const double lo = gamma(mbar - 1) * (1.0 + 1e-14);
    double hi = 2.0 * gamma(mbar - 1);
    while (gamma_real(model, N, hi) >= 1.0) hi *= 2.0;
    roots.push_back(bisect_gamma(model, N, lo, hi, false));
  }

  std::sort(roots.begin(), roots.end());
  Eigen::VectorXd out = Eigen::Map<Eigen::VectorXd>(roots.data(), roots.size());
  for (int i = 0; i < out.size(); ++i)
    if (std::fabs(gamma_real(model, N, out(i)) - 1.0) > 1e-10)
      throw numerical_error("theta_roots: residual above tolerance");
  return out;
}

Eigen::VectorXcd z_prime_zeros(const PopulationModel& model, int N) {
  const int mbar = model.num_atoms();
  const Eigen::VectorXd& gamma = model.atom_values();
  Eigen::VectorXd u(mbar);
  for (int m = 0; m < mbar; ++m)
    u(m) = gamma(m) *
           std::sqrt(static_cast<double>(model.atom_multiplicity(m)) / N);

  // z'(w) = 0 is det((D - wI)^2 - u u^T) = 0; linearize as the balanced
  // block companion [[D, s u u^T], [I/s, D]].
  const double s = std::max(u.norm(), 1e-300);
  Eigen::MatrixXd block(2 * mbar, 2 * mbar);
  block.setZero();
  block.topLeftCorner(mbar, mbar).diagonal() = gamma;
  block.bottomRightCorner(mbar, mbar).diagonal() = gamma;
  block.topRightCorner(mbar, mbar) = s * (u * u.transpose());
  block.bottomLeftCorner(mbar, mbar) =
      Eigen::MatrixXd::Identity(mbar, mbar) / s;
  Eigen::EigenSolver<Eigen::MatrixXd> eig(block, false);
  if (eig.info() != Eigen::Success)
    throw numerical_error("z_prime_zeros: eigenvalue extraction failed");
  Eigen::VectorXcd zeros = eig.eigenvalues();

  const Eigen::VectorXd a = u.cwiseProduct(u);
  for (int r = 0; r < zeros.size(); ++r) {
    for (int it = 0; it < 6; ++it) {
      Complex h{1.0, 0.0}, hp{0.0, 0.0};
      for (int m = 0; m < mbar; ++m) {
        const Complex d = gamma(m) - zeros(r);
        h -= a(m) / (d * d);
        hp -= 2.0 * a(m) / (d * d * d);
      }
      if (std::abs(hp) < 1e-300) break;
      const Complex step = h / hp;
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
      zeros(r) -= step;
      if (std::abs(step) < 1e-14 * (1.0 + std::abs(zeros(r)))) break;
    }
    // Collapse roundoff imaginary parts so real zeros are exactly real.
    if (std::abs(zeros(r).imag()) < 1e-11 * (1.0 + std::abs(zeros(r))))
      zeros(r) = Complex(zeros(r).real(), 0.0);
  }
  std::sort(zeros.data(), zeros.data() + zeros.size(),
            [](Complex x, Complex y) {
              return x.real() != y.real() ? x.real() < y.real()
                                          : x.imag() < y.imag();
            });
  return zeros;
}

Eigen::VectorXcd phi_roots(const PopulationModel& model, int N, Complex w) {
  const int mbar = model.num_atoms();
  const Eigen::VectorXd& gamma = model.atom_values();
  Eigen::VectorXcd a(mbar);
  for (int m = 0; m < mbar; ++m) {
    const Complex d = gamma(m) - w;
    if (std::abs(d) < 1e-12 * gamma(m))
      throw singular_evaluation_error("phi_roots: w hits an atom");
    a(m) = static_cast<double>(model.atom_multiplicity(m)) * gamma(m) *
           gamma(m) / (static_cast<double>(N) * d);
  }

  // Clearing denominators in Gamma(w, phi) = 1 gives a degree-Mbar
  // polynomial whose roots are the eigenvalues of diag(gamma) - a * 1^T.
  Eigen::MatrixXcd companion =
      gamma.cast<Complex>().asDiagonal().toDenseMatrix();
  companion.colwise() -= a;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(companion, false);
  if (eig.info() != Eigen::Success)
    throw numerical_error("phi_roots: eigenvalue extraction failed");
  Eigen::VectorXcd phi = eig.eigenvalues();

  // Newton polish on g(phi) = 1 - sum_m a_m / (gamma_m - phi).
  for (int r = 0; r < mbar; ++r) {
    for (int it = 0; it < 3; ++it) {
      Complex g{1.0, 0.0}, dg{0.0, 0.0};
      for (int m = 0; m < mbar; ++m) {
        const Complex d = gamma(m) - phi(r);
        g -= a(m) / d;
        dg -= a(m) / (d * d);
      }
      if (std::abs(dg) < 1e-300) break;
      const Complex step = g / dg;
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
      phi(r) -= step;
      if (std::abs(step) < 1e-14 * (1.0 + std::abs(phi(r)))) break;
    }
  }

  for (int r = 0; r < mbar; ++r) {
    const Complex res = gamma_fn(model, N, w, phi(r)) - 1.0;
    if (std::abs(res) > 1e-9)
      throw numerical_error("phi_roots: residual above tolerance");
  }
  return phi;
}

}  // namespace covdist
