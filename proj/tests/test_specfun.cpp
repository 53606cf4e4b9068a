#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "covdist/errors.hpp"
#include "covdist/specfun.hpp"
#include "oracles.hpp"

using covdist::dilog;
using covdist::phi2;

namespace {
constexpr double kPiSq6 = 1.6449340668482264;
}

TEST_CASE("dilog fixed values") {
  CHECK(dilog(0.0) == 0.0);
  CHECK(dilog(1.0) == doctest::Approx(kPiSq6).epsilon(1e-14));
  // direct 1e6-term series at x = 0.5
  CHECK(std::fabs(dilog(0.5) - oracles::dilog_series(0.5, 1000000)) < 1e-12);
}

TEST_CASE("dilog matches the direct series on [-1, 0.5]") {
  for (int i = 0; i < 100; ++i) {
    const double x = -1.0 + 1.5 * i / 99.0;
    CHECK(std::fabs(dilog(x) - oracles::dilog_series(x, 1000000)) < 1e-12);
  }
}

TEST_CASE("dilog domain") {
  CHECK_THROWS_AS(dilog(1.0000001), covdist::domain_error);
  // deep arguments still hit the series through the inversion identity
  CHECK(std::isfinite(dilog(-1e8)));
}

TEST_CASE("phi2 branch continuity and fixed values") {
  CHECK(phi2(1.0) == doctest::Approx(kPiSq6).epsilon(1e-14));
  CHECK(phi2(1.0 - 1e-12) == doctest::Approx(phi2(1.0 + 1e-12)).epsilon(1e-9));
  const double expected = 2.0 * kPiSq6 - 0.5 * std::log(2.0) * std::log(2.0) -
                          dilog(0.5);
  CHECK(phi2(2.0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK_THROWS_AS(phi2(0.0), covdist::domain_error);
  CHECK_THROWS_AS(phi2(-3.0), covdist::domain_error);
}

TEST_CASE("phi2 reflection identity") {
  const double x0 = 0.37;
  CHECK(std::fabs(phi2(x0) + phi2(1.0 / x0) -
                  (2.0 * kPiSq6 - 0.5 * std::log(x0) * std::log(x0))) < 1e-12);
  for (int i = 1; i <= 1000; ++i) {
    const double x = static_cast<double>(i) / 1001.0;
    const double lhs = phi2(x) + phi2(1.0 / x);
    const double rhs = 2.0 * kPiSq6 - 0.5 * std::log(x) * std::log(x);
    CHECK(std::fabs(lhs - rhs) < 1e-12);
  }
}

TEST_CASE("phi2 monotone increasing on (0, 1]") {
  double prev = phi2(1e-3);
  for (int i = 2; i <= 1000; ++i) {
    const double x = 1e-3 + (1.0 - 1e-3) * (i - 1) / 999.0;
    const double cur = phi2(x);
    CHECK(cur > prev);
    prev = cur;
  }
}
