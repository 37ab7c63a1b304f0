#include <cmath>

#include "doctest.h"
#include "reslab/escape.hpp"
#include "reslab/profile.hpp"

using namespace reslab;

namespace {

ClosedOrbit neck_orbit(const Profile& p) {
  auto orbits = classify_orbits(p, Potential::zero(), 1.0);
  for (const auto& o : orbits)
    if (o.stability == Stability::hyperbolic && o.mu > 0) return o;
  REQUIRE(false);
  return {};
}

}  // namespace

TEST_CASE("nested escape regions") {
  EscapeRegions r = EscapeRegions::boxes(0.0, 0.10, 0.18, 0.28, 0.40, 0.55);
  r.check_nesting();
  CHECK(r.V1.nested_in(r.U1, 0.05));
  CHECK(r.V0.nested_in(r.U, 0.05));
  EscapeRegions bad = EscapeRegions::boxes(0.0, 0.30, 0.18, 0.28, 0.40, 0.55);
  CHECK_THROWS(bad.check_nesting());
}

TEST_CASE("escape function on the catenoid neck") {
  Profile p = Profile::make(ProfileKind::catenoid, {}, 8.0);
  Potential V = Potential::zero();
  ClosedOrbit orbit = neck_orbit(p);
  EscapeRegions regions =
      EscapeRegions::boxes(orbit.s_star, 0.10, 0.18, 0.28, 0.40, 0.55);
  EscapeFunction q = build_escape_function(p, V, orbit, regions);
  CHECK(q.seed_count() >= 2);
  REQUIRE(q.branches().size() >= 2);
  for (const auto& br : q.branches()) {
    CHECK(br.t_exit_V1 > 0);
    CHECK(br.t_exit_V1 < br.t_exit_U1);
    CHECK(br.t_exit_U1 < br.t_exit_U0);
    CHECK(br.t_exit_U0 < br.t_exit_V0);
    CHECK(br.t_exit_V0 < br.t_exit_U);
  }

  SUBCASE("values near the orbit and outside U") {
    auto near = q.evaluate(orbit.s_star, 0.0);
    CHECK(near.q == doctest::Approx(1.0).epsilon(1e-8));
    auto far = q.evaluate(orbit.s_star + 2.0, 0.0);
    CHECK(far.q == 0.0);
    CHECK(far.Hpq == 0.0);
  }

  SUBCASE("verification clauses") {
    EscapeVerification ver = verify_escape_function(q);
    CAPTURE(ver.failures.empty() ? std::string("none") : ver.failures[0]);
    CHECK(ver.pass);
    CHECK(ver.max_Hpq_on_flowout <= 1e-10);
    CHECK(ver.c_min > 0);
    CHECK(ver.sup_q_err_near_gamma <= 1e-6);
    CHECK(ver.sup_q_outside_U <= 1e-12);
    CHECK(ver.monotone_along_flow);
    CHECK(std::isfinite(ver.max_sqrt_q_grad));
    CHECK(std::isfinite(ver.max_sqrt_negHpq_grad));
  }

  SUBCASE("derivative along the flow matches finite differences") {
    // Follow a short trajectory through a point in the decay annulus and
    // compare H_p q against d/dt of q along it.
    for (double s : {orbit.s_star + 0.22, orbit.s_star - 0.22}) {
      double sig2 = 1.0 - effective_potential(p, V, orbit.mu, s);
      if (sig2 <= 0) continue;
      double sig = std::sqrt(sig2);
      double dt = 1e-5;
      Trajectory tr = flow(p, V, {s, sig, orbit.mu}, 2 * dt, dt);
      auto e0 = q.evaluate(tr.samples.front().s, tr.samples.front().sigma);
      auto e2 = q.evaluate(tr.back().s, tr.back().sigma);
      double fd = (e2.q - e0.q) / (2 * dt);
      auto mid = q.evaluate(tr.samples[1].s, tr.samples[1].sigma);
      CHECK(mid.Hpq == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
    }
  }

  SUBCASE("grid dump covers U") {
    auto gd = q.grid();
    REQUIRE(gd.n > 10);
    CHECK(gd.q.size() == size_t(gd.n) * gd.n);
    CHECK(gd.s_lo < regions.U.rects[0].s_lo);
    CHECK(gd.s_hi > regions.U.rects[0].s_hi);
    double qmin = 1e300, qmax = -1e300;
    for (double v : gd.q) {
      qmin = std::min(qmin, v);
      qmax = std::max(qmax, v);
    }
    CHECK(qmin >= -1e-12);
    CHECK(qmax <= 1.0 + 1e-12);
  }

  SUBCASE("commutator decomposition") {
    CommutatorDecomposition cd = commutator_decomposition(q, {});
    CHECK(cd.max_identity_residual <= 1e-10);
    CHECK(cd.max_abs_e_near_flowout <= 1e-12);
    CHECK(cd.max_b_outside_Uminus <= 1e-12);
    bool some_b = false, some_e = false;
    for (double v : cd.b) some_b = some_b || v > 1e-3;
    for (double v : cd.e) some_e = some_e || std::abs(v) > 1e-6;
    CHECK(some_b);
    CHECK(some_e);
  }
}

TEST_CASE("tube profile is decreasing with the required floor") {
  TubeProfile tp;
  tp.T_V1 = 1.0;
  tp.T_V0 = 3.0;
  tp.T_U = 4.0;
  tp.a1 = 1.5;
  tp.a2 = 0.5;
  CHECK(tp.chi(0.0) == doctest::Approx(0.0));
  CHECK(tp.chi(tp.T_U + 1.0) == doctest::Approx(-2.0));
  double prev = tp.chi(0.0);
  for (int i = 1; i <= 200; ++i) {
    double t = 5.0 * i / 200.0;
    double cur = tp.chi(t);
    CHECK(cur <= prev + 1e-12);
    CHECK(tp.dchi(t) <= 1e-12);
    prev = cur;
  }
  // Strict decrease between the V1 and V0 exits.
  CHECK(tp.chi(1.2) > tp.chi(2.8));
}
