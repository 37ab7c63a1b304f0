#include <cmath>
#include <random>

#include "doctest.h"
#include "reslab/gluing.hpp"

using namespace reslab;

namespace {

cvec random_vec(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  cvec v(n);
  for (auto& x : v) x = {u(rng), u(rng)};
  return v;
}

double rel_err(const cvec& got, const cvec& want) {
  double num = 0, den = 0;
  for (size_t i = 0; i < got.size(); ++i) {
    num += std::norm(got[i] - want[i]);
    den += std::norm(want[i]);
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("glued model construction") {
  Profile p = Profile::make(ProfileKind::double_well, {2.0, 0.1, 1.0}, 4.5);
  Potential V = Potential::zero();
  double h = 0.04;
  Grid1D g = Grid1D::make(4.5, h);
  int m = int(std::round(p.a(2.0) / h));
  GluedModels models = build_glued_models(p, V, h, m, {0.0, 0.0}, g);

  SUBCASE("cutoff geometry") {
    double s0 = 2.0;
    for (int i = 0; i < g.n; i += 7) {
      double s = g.node(i);
      CHECK(models.chi0[i] + models.chi1[i] == doctest::Approx(1.0));
      CHECK(models.W0[i] * models.W1[i] <= 1e-30);
      CHECK(models.g0[i] * models.W0[i] <= 1e-30);
      CHECK(models.g1[i] * models.W1[i] <= 1e-30);
      if (std::abs(s) <= s0 / 7) CHECK(models.W1[i] == doctest::Approx(1.0));
      if (std::abs(s) >= 6 * s0 / 7) CHECK(models.W0[i] == doctest::Approx(1.0));
      if (std::abs(s) <= 3 * s0 / 7) CHECK(models.chi0[i] == doctest::Approx(1.0));
      // g_j covers the support of chi_j.
      if (models.chi0[i] > 1e-14) CHECK(models.g0[i] >= models.chi0[i] - 1e-12);
      if (models.chi1[i] > 1e-14) CHECK(models.g1[i] >= models.chi1[i] - 1e-12);
    }
    CHECK(models.P.has_barrier);
    CHECK(models.P0.has_barrier);
    CHECK(models.P1.has_barrier);
  }

  SUBCASE("commutators are offdiagonal and local") {
    cvec v = random_vec(g.n, 11), Pv, gPv, Pgv, want;
    // C0 v must equal P(g0 v) - g0 (P v).
    cvec g0v(g.n);
    for (int i = 0; i < g.n; ++i) g0v[i] = models.g0[i] * v[i];
    models.P.mat.matvec(g0v, Pgv);
    models.P.mat.matvec(v, Pv);
    want.resize(g.n);
    for (int i = 0; i < g.n; ++i) want[i] = Pgv[i] - models.g0[i] * Pv[i];
    cvec got;
    models.C0.matvec(v, got);
    CHECK(rel_err(got, want) <= 1e-12);
    for (int i = 0; i < g.n; i += 5) CHECK(std::abs(models.C0(i, i)) == 0.0);
  }

  SUBCASE("parametrix identity on probes") {
    Parametrix par(models);
    for (unsigned seed : {1u, 2u, 3u}) {
      cvec v = random_vec(g.n, seed);
      cvec Fv = par.F(v), PFv;
      models.P.mat.matvec(Fv, PFv);
      cvec want(g.n);
      cvec a0 = par.A(0, v), a1 = par.A(1, v);
      for (int i = 0; i < g.n; ++i) want[i] = v[i] + a0[i] + a1[i];
      CHECK(rel_err(PFv, want) <= 1e-11);
    }
  }

  SUBCASE("squared remainders carry only the barrier kernel tail") {
    // The differential part of [P, g_j] is local, so A_j^2 sees only the
    // far-off-diagonal tail of the quantized barrier across the g_j seam.
    Parametrix par(models);
    for (int j : {0, 1}) {
      PowerIterResult sq = operator_norm(
          LinOp::compose(par.A_op(j), par.A_op(j)), 1e-2, 2000, 5);
      PowerIterResult one = operator_norm(par.A_op(j), 1e-2, 2000, 6);
      CHECK(sq.norm <= 1e-2 * std::max(1.0, one.norm * one.norm));
    }
  }
}

TEST_CASE("glued model validation") {
  Potential V = Potential::zero();
  Profile p = Profile::make(ProfileKind::double_well, {2.0, 0.1, 1.0}, 4.5);
  Grid1D coarse = Grid1D::make(4.5, 0.2);
  CHECK_THROWS_WITH_AS(build_glued_models(p, V, 0.2, 7, {0.0, 0.0}, coarse),
                       doctest::Contains("grid-too-coarse"),
                       std::invalid_argument);
  Profile cat = Profile::make(ProfileKind::catenoid, {}, 4.5);
  Grid1D fine = Grid1D::make(4.5, 0.04);
  CHECK_THROWS_WITH_AS(build_glued_models(cat, V, 0.04, 30, {0.0, 0.0}, fine),
                       doctest::Contains("double_well"),
                       std::invalid_argument);
}

TEST_CASE("gluing report over a short h list") {
  Profile p = Profile::make(ProfileKind::double_well, {2.0, 0.1, 1.0}, 4.5);
  GluingReport rep = verify_gluing(p, Potential::zero(), {0.045, 0.04},
                                   {0.0, 0.0}, p.a(2.0));
  REQUIRE(rep.rows.size() == 2);
  for (const auto& r : rep.rows) {
    CHECK(r.error.empty());
    CHECK(r.exact_identity_rel <= 1e-10);
    CHECK(r.iterated_identity_rel <= 1e-10);
    CHECK(r.norm_A0_sq <= 1e-2 * std::max(1.0, r.norm_A0 * r.norm_A0));
    CHECK(r.norm_A1_sq <= 1e-2 * std::max(1.0, r.norm_A1 * r.norm_A1));
    CHECK(r.discrepancy <= 0.05);
  }
  CHECK_FALSE(rep.fits_ok);  // two points cannot support a decay fit
}
