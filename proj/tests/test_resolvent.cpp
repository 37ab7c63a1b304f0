#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "doctest.h"
#include "reslab/bump.hpp"
#include "reslab/resolvent.hpp"

using namespace reslab;

namespace {

using DenseC = Eigen::MatrixXcd;

DenseC linop_to_dense(const LinOp& M) {
  DenseC D(M.n, M.n);
  cvec e(M.n, {0.0, 0.0}), col;
  for (int j = 0; j < M.n; ++j) {
    e[j] = 1.0;
    M.apply(e, col);
    for (int i = 0; i < M.n; ++i) D(i, j) = col[i];
    e[j] = 0.0;
  }
  return D;
}

std::vector<std::pair<double, double>> sample_law(
    const std::function<double(double)>& N) {
  std::vector<std::pair<double, double>> rows;
  for (double h : {0.1, 0.05, 0.02, 0.01, 0.005, 0.002})
    rows.emplace_back(h, N(h));
  return rows;
}

}  // namespace

TEST_CASE("scaling fits recover synthetic laws") {
  SUBCASE("pure 1/h") {
    auto fit = fit_scaling(sample_law([](double h) { return 2.0 / h; }));
    CHECK(fit.ok);
    CHECK(fit.alpha_pure == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(fit.c_pure == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(fit.residual_pure <= 1e-10);
    CHECK(fit.alpha_for(Prediction::nontrapping_h_inv) ==
          doctest::Approx(1.0));
  }
  SUBCASE("log loss") {
    auto fit = fit_scaling(sample_law(
        [](double h) { return std::log(1.0 / h) / h; }));
    CHECK(fit.alpha == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit.beta == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit.residual <= 1e-10);
    CHECK(fit.alpha_for(Prediction::log_loss) == doctest::Approx(1.0));
  }
  SUBCASE("squared log loss") {
    auto fit = fit_scaling(sample_law([](double h) {
      return std::pow(std::log(1.0 / h), 2.0) / h;
    }));
    CHECK(fit.alpha == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit.beta == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("h^-2 blowup") {
    auto fit = fit_scaling(sample_law([](double h) { return 1.0 / (h * h); }));
    CHECK(fit.alpha_pure == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(fit.alpha_for(Prediction::elliptic_blowup) == doctest::Approx(2.0));
  }
  SUBCASE("too few points") {
    CHECK_THROWS(fit_scaling({{0.1, 1.0}, {0.05, 2.0}, {0.02, 5.0}}));
    CHECK_THROWS(fit_scaling(
        {{0.1, 1.0}, {0.1, 1.0}, {0.1, 1.0}, {0.1, 1.0}, {0.1, 1.0}}));
  }
}

TEST_CASE("mode norms match dense singular values") {
  Profile p = Profile::make(ProfileKind::catenoid, {}, 2.0);
  Potential V = Potential::zero();
  double h = 0.1;
  Grid1D g = Grid1D::make(2.0, h);
  REQUIRE(g.n <= 400);
  AbsorberSpec ab;
  CutoffOperator A(SymbolXS::spatial([](double s) {
                     return plateau_bump(s, -1.0, -0.6, 0.6, 1.0);
                   }),
                   nullptr, h, g);
  for (int m : {0, 4, 9}) {
    ModeOperator op = build_mode_operator(p, V, h, m, {0.0, 0.0}, g, &ab);
    BandedLU lu(op.mat);
    ModeNorm mn = mode_resolvent_norm(A.base_op(), lu, op.mat, A.base_op(),
                                      1e-8, 20000, 3 + m);
    CHECK(mn.converged);
    CHECK(mn.solve_residual <= 1e-8);
    DenseC DP = linop_to_dense(LinOp::from_banded(&op.mat));
    DenseC DA = linop_to_dense(A.base_op());
    DenseC M = DA * DP.inverse() * DA;
    double svd = Eigen::JacobiSVD<DenseC>(M).singularValues()(0);
    CHECK(std::abs(mn.norm - svd) <= 1e-6 * svd);
  }
}

TEST_CASE("resolvent norm over a mode window") {
  ExperimentSpec spec = preset("nontrapping");
  spec.h_list = {0.1};
  NormAtH row = resolvent_norm(spec, 0.1);
  CHECK(row.error.empty());
  CHECK(row.all_converged);
  CHECK(row.sentinels_ok);
  CHECK(row.norm > 0.0);
  CHECK_FALSE(row.modes.empty());
  CHECK_FALSE(row.sentinels.empty());
  CHECK(row.max_solve_residual <= 1e-8);
  // The reported max is attained by the listed argmax mode.
  double best = 0.0;
  int best_m = 0;
  for (const auto& mr : row.modes)
    if (mr.norm > best) {
      best = mr.norm;
      best_m = mr.m;
    }
  CHECK(row.norm == doctest::Approx(best));
  CHECK(std::abs(row.m_star) == std::abs(best_m));

  // Mode results do not depend on the number of workers.
  NormAtH row4 = resolvent_norm(spec, 0.1, 4);
  CHECK(row4.norm == row.norm);
  CHECK(row4.m_star == row.m_star);
  REQUIRE(row4.modes.size() == row.modes.size());
  for (size_t k = 0; k < row.modes.size(); ++k)
    CHECK(row4.modes[k].norm == row.modes[k].norm);
}

TEST_CASE("sweeps validate their inputs") {
  ExperimentSpec spec = preset("nontrapping");
  spec.h_list = {0.1, 0.1, 0.05};
  CHECK_THROWS(run_sweep(spec));

  spec = preset("nontrapping");
  spec.h_list = {0.1, 0.08, 0.06, 0.05};
  spec.audits.push_back([](const ExperimentSpec&) {
    return AuditOutcome{"always-red", false, "synthetic"};
  });
  CHECK_THROWS_WITH_AS(run_sweep(spec),
                       doctest::Contains("hypothesis-audit-failed"),
                       std::runtime_error);
  SweepResult res = run_sweep(spec, 1, true);
  CHECK_FALSE(res.audits_pass);
  CHECK(res.rows.size() == 4);
}

TEST_CASE("preset table") {
  auto names = preset_names();
  CHECK(names.size() == 7);
  for (const auto& n : names) {
    ExperimentSpec s = preset(n);
    CHECK(s.name == n);
    CHECK(s.h_list.size() >= 4);
    for (size_t k = 1; k < s.h_list.size(); ++k)
      CHECK(s.h_list[k] < s.h_list[k - 1]);
  }
  CHECK_THROWS(preset("no-such-preset"));
}
