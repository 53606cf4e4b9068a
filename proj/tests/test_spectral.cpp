#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "covdist/population.hpp"
#include "covdist/roots.hpp"
#include "covdist/rng.hpp"
#include "covdist/sampling.hpp"
#include "covdist/spectrum.hpp"
#include "oracles.hpp"

using namespace covdist;

TEST_CASE("toeplitz_model basics") {
  const auto id3 = toeplitz_model(0.0, 3);
  CHECK(id3.num_atoms() == 1);
  CHECK(id3.atom_value(0) == doctest::Approx(1.0));
  CHECK(id3.atom_multiplicity(0) == 3);

  const auto two = toeplitz_model(0.5, 2);
  REQUIRE(two.num_atoms() == 2);
  CHECK(two.atom_value(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(two.atom_value(1) == doctest::Approx(1.5).epsilon(1e-12));

  // dense eigendecomposition oracle at M = 40
  const auto big = toeplitz_model(0.8, 40);
  Eigen::MatrixXd r(40, 40);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) r(i, j) = std::pow(0.8, std::abs(i - j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
  CHECK((big.eigenvalues() - eig.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(toeplitz_model(1.0, 4), domain_error);
  CHECK_THROWS_AS(toeplitz_model(0.5, 0), domain_error);
}

TEST_CASE("population projectors reconstruct the covariance") {
  const auto m = toeplitz_model(0.6, 12);
  Eigen::MatrixXd recon = Eigen::MatrixXd::Zero(12, 12);
  for (int a = 0; a < m.num_atoms(); ++a) {
    const Eigen::MatrixXd p = m.projector(a);
    CHECK((p * p - p).cwiseAbs().maxCoeff() < 1e-10);   // idempotent
    CHECK(p.trace() == doctest::Approx(m.atom_multiplicity(a)).epsilon(1e-10));
    recon += m.atom_value(a) * p;
  }
  CHECK((recon - m.covariance()).norm() < 1e-10 * m.covariance().norm());
}

TEST_CASE("sample_gaussian determinism and first moments") {
  const auto id = toeplitz_model(0.0, 6);
  const auto a = sample_gaussian(id, 50, 1234);
  const auto b = sample_gaussian(id, 50, 1234);
  CHECK(a.observations == b.observations);  // bit-identical

  // per-coordinate variance close to 1 at N = 1e5 (within 5 sigma)
  const int n = 100000;
  const auto big = sample_gaussian(id, n, 99);
  for (int i = 0; i < 6; ++i) {
    const double var = big.observations.row(i).squaredNorm() / n;
    CHECK(std::fabs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
  }

  // E[Y Y^T / N] approx R for a correlated model
  const auto model = toeplitz_model(0.5, 8);
  const auto y = sample_gaussian(model, 100000, 7);
  const Eigen::MatrixXd scm =
      y.observations * y.observations.transpose() / 100000.0;
  CHECK((scm - model.covariance()).norm() < 0.05);
}

TEST_CASE("complex sampling is circularly symmetric with the right scale") {
  const auto id = toeplitz_model(0.0, 4);
  const auto y = sample_gaussian_complex(id, 50000, 5);
  const Eigen::MatrixXcd scm = y.observations * y.observations.adjoint() / 50000.0;
  CHECK((scm - Eigen::MatrixXcd::Identity(4, 4)).norm() < 0.05);
}

TEST_CASE("scm_spectrum identities") {
  // sqrt(N) I columns: every eigenvalue is exactly 1
  const int m = 5;
  SampleSet<double> unit;
  unit.observations = std::sqrt(5.0) * Eigen::MatrixXd::Identity(m, m);
  const auto s = scm_spectrum(unit);
  CHECK((s.eigenvalues.array() - 1.0).abs().maxCoeff() < 1e-12);

  // trace identity
  const auto model = toeplitz_model(0.4, 6);
  const auto y = sample_gaussian(model, 17, 3);
  const auto sp = scm_spectrum(y);
  const double tr = sp.eigenvalues.sum();
  const double direct = y.observations.squaredNorm() / 17.0;
  CHECK(std::fabs(tr - direct) < 1e-12 * std::max(1.0, direct));

  // dense-eig oracle at M = 4, N = 12
  const auto y2 = sample_gaussian(toeplitz_model(0.3, 4), 12, 11);
  const auto sp2 = scm_spectrum(y2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      y2.observations * y2.observations.transpose() / 12.0);
  CHECK((sp2.eigenvalues - eig.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mu_roots closed forms and errors") {
  Eigen::VectorXd one(1);
  one << 2.0;
  const auto mu = mu_roots(one, 4);
  CHECK(mu(0) == doctest::Approx(1.5).epsilon(1e-12));

  Eigen::VectorXd lam(3);
  lam << 1.0, 2.0, 3.0;
  CHECK_THROWS_AS(mu_roots(lam, 3), unsupported_regime_error);
  Eigen::VectorXd tied(3);
  tied << 1.0, 1.0 + 1e-14, 3.0;
  CHECK_THROWS_AS(mu_roots(tied, 12), degenerate_spectrum_error);
}

TEST_CASE("mu_roots against an independent bisection oracle") {
  Rng rng(42);
  Eigen::VectorXd lam(6);
  for (int i = 0; i < 6; ++i) lam(i) = 0.2 + 2.5 * rng.uniform();
  std::sort(lam.data(), lam.data() + 6);
  const int n = 20;
  const auto mu = mu_roots(lam, n);
  for (int k = 0; k < 6; ++k) {
    const double lo = k == 0 ? 0.0 : lam(k - 1);
    const double ref = oracles::mu_bisect(lam, n, lo, lam(k));
    CHECK(std::fabs(mu(k) - ref) < 1e-10 * std::max(1.0, lam(k)));
  }
}

TEST_CASE("interlacing and product identity on random spectra") {
  Rng rng(7);
  for (int trial = 0; trial < 120; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform() * 62);
    const int n = m + 1 + static_cast<int>(rng.uniform() * (7 * m));
    Eigen::VectorXd lam(m);
    for (int i = 0; i < m; ++i) lam(i) = 0.05 + 4.0 * rng.uniform();
    std::sort(lam.data(), lam.data() + m);
    bool distinct = true;
    for (int i = 1; i < m; ++i)
      if (lam(i) - lam(i - 1) <= 1e-10 * lam(m - 1)) distinct = false;
    if (!distinct) continue;
    const auto mu = mu_roots(lam, n);
    double prev = 0.0;
    for (int k = 0; k < m; ++k) {
      CHECK(mu(k) > prev);
      CHECK(mu(k) < lam(k));
      prev = lam(k);
    }
    // product identity in log space
    double lhs = 0.0;
    for (int k = 0; k < m; ++k) lhs += std::log(mu(k)) - std::log(lam(k));
    CHECK(std::fabs(lhs - std::log1p(-static_cast<double>(m) / n)) < 1e-10);
  }
}

TEST_CASE("theta_roots closed forms") {
  // single atom gamma = 1, K = M = 4, N = 16: theta = 1 -+ sqrt(1/4)
  const auto id4 = toeplitz_model(0.0, 4);
  const auto t1 = theta_roots(id4, 16);
  REQUIRE(t1.size() == 2);
  CHECK(t1(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(t1(1) == doctest::Approx(1.5).epsilon(1e-10));

  // gamma = 2, K = M = 10, N = 40: theta = {1, 3}
  PopulationModel scaled(2.0 * Eigen::MatrixXd::Identity(10, 10));
  const auto t2 = theta_roots(scaled, 40);
  REQUIRE(t2.size() == 2);
  CHECK(t2(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(t2(1) == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("theta_roots two-atom model against grid bisection") {
  Eigen::VectorXd diag(4);
  diag << 1.0, 1.0, 3.0, 3.0;
  PopulationModel model(diag.asDiagonal().toDenseMatrix());
  REQUIRE(model.num_atoms() == 2);
  const int n = 40;
  const auto theta = theta_roots(model, n);
  REQUIRE(theta.size() == 4);
  const auto ref = oracles::theta_grid_bisect(model, n, 0.01, 6.0, 200000);
  REQUIRE(ref.size() == 4);
  for (int i = 0; i < 4; ++i)
    CHECK(theta(i) == doctest::Approx(ref[i]).epsilon(1e-9));
  // brackets the spectrum
  CHECK(theta(0) < model.atom_value(0));
  CHECK(theta(3) > model.atom_value(1));
}

TEST_CASE("theta_roots raises on merged clusters") {
  CHECK_THROWS_AS(theta_roots(toeplitz_model(0.3, 8), 24),
                  cluster_overlap_error);
}

TEST_CASE("z_prime_zeros covers the full 2 Mbar set consistently") {
  // Separated case: all zeros real, matching theta_roots.
  Eigen::VectorXd diag(4);
  diag << 1.0, 1.0, 3.0, 3.0;
  PopulationModel model(diag.asDiagonal().toDenseMatrix());
  const auto zeros = z_prime_zeros(model, 40);
  const auto theta = theta_roots(model, 40);
  REQUIRE(zeros.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(zeros(i).imag() == 0.0);
    CHECK(zeros(i).real() == doctest::Approx(theta(i)).epsilon(1e-9));
  }
  // Merged case: conjugate pairs, residual small, outermost two real.
  const auto merged_model = toeplitz_model(0.3, 8);
  const auto merged = z_prime_zeros(merged_model, 24);
  REQUIRE(merged.size() == 16);
  double imag_sum = 0.0;
  for (int i = 0; i < 16; ++i) {
    imag_sum += merged(i).imag();
    CHECK(std::abs(gamma_fn(merged_model, 24, merged(i), merged(i)) - 1.0) <
          1e-8);
  }
  CHECK(std::fabs(imag_sum) < 1e-10);
}

TEST_CASE("z_prime examples") {
  const auto id6 = toeplitz_model(0.0, 6);
  CHECK(z_prime(id6, 24, {0.0, 0.0}).real() ==
        doctest::Approx(1.0 - 6.0 / 24.0).epsilon(1e-14));
  const auto theta = theta_roots(id6, 24);
  for (int i = 0; i < theta.size(); ++i)
    CHECK(std::abs(z_prime(id6, 24, theta(i))) < 1e-9);
  CHECK_THROWS_AS(z_prime(id6, 24, {1.0, 0.0}), singular_evaluation_error);
}

TEST_CASE("z_prime matches finite differences of z(omega)") {
  const auto model = toeplitz_model(0.5, 5);
  const int n = 20;
  auto z_of = [&](std::complex<double> w) {
    std::complex<double> s = 0.0;
    for (int k = 0; k < model.num_atoms(); ++k)
      s += static_cast<double>(model.atom_multiplicity(k)) *
           model.atom_value(k) / (model.atom_value(k) - w);
    return w * (1.0 - s / static_cast<double>(n));
  };
  const std::complex<double> w{0.8, 0.6};
  const double h = 1e-6;
  const auto fd = (z_of(w + h) - z_of(w - h)) / (2.0 * h);
  CHECK(std::abs(fd - z_prime(model, n, w)) < 1e-6);
}

TEST_CASE("phi_roots closed form and limits") {
  // single atom: phi = gamma - (M/N) gamma^2 / (gamma - w)
  const auto id4 = toeplitz_model(0.0, 4);
  const auto phi = phi_roots(id4, 16, {0.5, 0.0});
  REQUIRE(phi.size() == 1);
  CHECK(phi(0).real() == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(std::fabs(phi(0).imag()) < 1e-12);

  // as w approaches a theta root, one phi root approaches w
  const auto theta = theta_roots(id4, 16);
  const std::complex<double> w{theta(1) + 1e-8, 0.0};
  const auto near = phi_roots(id4, 16, w);
  double best = 1e9;
  for (int i = 0; i < near.size(); ++i)
    best = std::min(best, std::abs(near(i) - w));
  CHECK(best < 1e-6);
}

TEST_CASE("phi_roots against the expanded-polynomial companion oracle") {
  Eigen::VectorXd diag(6);
  diag << 0.5, 0.5, 1.2, 1.2, 2.5, 2.5;
  PopulationModel model(diag.asDiagonal().toDenseMatrix());
  REQUIRE(model.num_atoms() == 3);
  const int n = 30;
  for (const std::complex<double> w :
       {std::complex<double>{0.9, 0.7}, {3.5, -0.4}, {0.2, 1.1}}) {
    auto mine = phi_roots(model, n, w);
    auto ref = oracles::phi_companion(model, n, w);
    std::sort(mine.data(), mine.data() + mine.size(),
              [](auto a, auto b) { return a.real() < b.real(); });
    std::sort(ref.data(), ref.data() + ref.size(),
              [](auto a, auto b) { return a.real() < b.real(); });
    for (int i = 0; i < 3; ++i) CHECK(std::abs(mine(i) - ref(i)) < 1e-9);
  }
}

TEST_CASE("phi_roots residual property at real w outside the theta span") {
  const auto model = toeplitz_model(0.6, 6);
  const int n = 30;
  const auto zeros = z_prime_zeros(model, n);
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < zeros.size(); ++i) {
    lo = std::min(lo, zeros(i).real());
    hi = std::max(hi, zeros(i).real());
  }
  for (double w : {0.5 * lo, 1.5 * hi, 3.0 * hi}) {
    const auto phi = phi_roots(model, n, {w, 0.0});
    for (int m = 0; m < phi.size(); ++m)
      CHECK(std::abs(gamma_fn(model, n, {w, 0.0}, phi(m)) - 1.0) < 1e-9);
  }
}

TEST_CASE("sample eigenvalues stay within the inflated support bound") {
  // soft statistical assertion per the support law
  const int m = 40;
  const auto model = toeplitz_model(0.5, m);
  int ok = 0;
  const int trials = 60;
  for (int t = 0; t < trials; ++t) {
    const int n = 4 * m;
    const auto sp = scm_spectrum(sample_gaussian(model, n, derive_seed(17, 0, t)));
    const double gmax = model.atom_value(model.num_atoms() - 1);
    const double root = 1.0 + std::sqrt(static_cast<double>(m) / n);
    if (sp.eigenvalues(m - 1) <= gmax * root * root * 1.2) ++ok;
  }
  CHECK(ok >= static_cast<int>(0.95 * trials));
}
