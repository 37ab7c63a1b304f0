#include <cmath>
#include <vector>

#include "doctest.h"
#include "reslab/profile.hpp"

using namespace reslab;

namespace {

double fd1(const Profile& p, double s, double dh = 1e-6) {
  return (p.a(s + dh) - p.a(s - dh)) / (2 * dh);
}

double fd2(const Profile& p, double s, double dh = 1e-4) {
  return (p.a(s + dh) - 2 * p.a(s) + p.a(s - dh)) / (dh * dh);
}

void check_derivatives(const Profile& p) {
  double S = p.domain_half_width();
  for (int i = 0; i <= 40; ++i) {
    double s = -S + 2 * S * i / 40.0;
    double scale = std::max(1.0, std::abs(p.a(s)));
    CHECK(p.da(s) == doctest::Approx(fd1(p, s)).epsilon(1e-7).scale(scale));
    CHECK(p.dda(s) == doctest::Approx(fd2(p, s)).epsilon(1e-5).scale(scale));
  }
}

}  // namespace

TEST_CASE("closed-form warp derivatives match finite differences") {
  check_derivatives(Profile::make(ProfileKind::catenoid, {}));
  check_derivatives(Profile::make(ProfileKind::hyperbolic_cylinder, {0.3}));
  check_derivatives(Profile::make(ProfileKind::double_well, {2.0, 0.1, 1.5}));
  check_derivatives(
      Profile::make(ProfileKind::nontrapping_monotone, {1.0, 0.25}, 4.0));
}

TEST_CASE("catenoid warp") {
  Profile p = Profile::make(ProfileKind::catenoid, {});
  CHECK(p.a(0.0) == doctest::Approx(1.0));
  CHECK(p.a(1.0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(p.da(0.0) == doctest::Approx(0.0));
  CHECK(p.dda(0.0) > 0.0);
  REQUIRE(p.critical_points().size() == 1);
  CHECK(p.critical_points()[0] == 0.0);
}

TEST_CASE("double well warp has a maximum at 0 and minima at +-s0") {
  double s0 = 2.0;
  Profile p = Profile::make(ProfileKind::double_well, {s0, 0.1, 1.5});
  CHECK(std::abs(p.da(0.0)) < 1e-12);
  CHECK(std::abs(p.da(s0)) < 1e-10);
  CHECK(std::abs(p.da(-s0)) < 1e-10);
  CHECK(p.dda(0.0) < 0.0);
  CHECK(p.dda(s0) > 0.0);
  CHECK(p.a(0.0) > p.a(s0));
  // a' has one sign on each side between the critical points
  for (int i = 1; i < 40; ++i) {
    double s = s0 * i / 40.0;
    CHECK(p.da(s) < 0.0);
    CHECK(p.da(-s) > 0.0);
  }
  auto cps = p.critical_points();
  REQUIRE(cps.size() == 3);
  CHECK(cps[0] == -s0);
  CHECK(cps[2] == s0);
}

TEST_CASE("profile parameter validation") {
  CHECK_THROWS_AS(Profile::make(ProfileKind::double_well, {-1.0, 0.1, 1.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Profile::make(ProfileKind::double_well, {2.0, 0.1, 1.5}, 3.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(Profile::make(ProfileKind::hyperbolic_cylinder, {-0.3}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Profile::make(ProfileKind::catenoid, {}, -1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(profile_kind_from_string("torus"), std::invalid_argument);
  CHECK_THROWS_AS(
      Profile::make_custom([](double s) { return s; }, nullptr, nullptr, 1.0),
      std::invalid_argument);
}

TEST_CASE("profile kind names round trip") {
  for (auto k : {ProfileKind::catenoid, ProfileKind::hyperbolic_cylinder,
                 ProfileKind::double_well, ProfileKind::nontrapping_monotone,
                 ProfileKind::custom})
    CHECK(profile_kind_from_string(to_string(k)) == k);
}

TEST_CASE("effective potential and its derivatives") {
  Profile p = Profile::make(ProfileKind::catenoid, {});
  Potential V(
      [](double s) { return 0.3 * std::exp(-4 * s * s); },
      [](double s) { return -2.4 * s * std::exp(-4 * s * s); }, -3.0, 3.0);
  double mu = 0.7;
  for (double s : {-2.0, -0.5, 0.0, 0.4, 1.7}) {
    double a = p.a(s);
    CHECK(effective_potential(p, V, mu, s) ==
          doctest::Approx(mu * mu / (a * a) + V(s)));
    const double dh = 1e-5;
    double fd = (effective_potential(p, V, mu, s + dh) -
                 effective_potential(p, V, mu, s - dh)) /
                (2 * dh);
    CHECK(effective_potential_ds(p, V, mu, s) ==
          doctest::Approx(fd).epsilon(1e-6));
    double fdd = (effective_potential_ds(p, V, mu, s + dh) -
                  effective_potential_ds(p, V, mu, s - dh)) /
                 (2 * dh);
    CHECK(effective_potential_dss(p, V, mu, s) ==
          doctest::Approx(fdd).epsilon(1e-4));
  }
  CHECK_THROWS_AS(effective_potential(p, V, mu, 9.0), std::out_of_range);
}

TEST_CASE("potential support clipping") {
  Potential V([](double) { return 1.0; }, [](double) { return 0.5; }, -1.0,
              1.0);
  CHECK(V(0.0) == 1.0);
  CHECK(V(1.5) == 0.0);
  CHECK(V.derivative(-2.0) == 0.0);
  CHECK(Potential::zero().is_zero());
  CHECK_FALSE(V.is_zero());
}
