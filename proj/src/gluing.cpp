#include "reslab/gluing.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "reslab/bump.hpp"

namespace reslab {

namespace {

std::vector<double> sample(const Grid1D& grid,
                           const std::function<double(double)>& f) {
  std::vector<double> v(grid.n);
  for (int j = 0; j < grid.n; ++j) v[j] = f(grid.node(j));
  return v;
}

BandedMatrix add_diag_barrier(const BandedMatrix& A,
                              const std::vector<double>& W) {
  BandedMatrix B = A;
  for (int j = 0; j < B.n(); ++j) B.add(j, j, cplx{0.0, -W[j]});
  return B;
}

/// [A, diag(g)] for a banded A: entries A(i,j) (g(j) - g(i)).
BandedMatrix commutator_with_diag(const BandedMatrix& A,
                                  const std::vector<double>& g) {
  BandedMatrix C(A.n(), A.kl(), A.ku());
  for (int j = 0; j < A.n(); ++j) {
    int i_lo = std::max(0, j - A.ku()), i_hi = std::min(A.n() - 1, j + A.kl());
    for (int i = i_lo; i <= i_hi; ++i) {
      if (i == j) continue;
      cplx a = A(i, j);
      if (a != cplx{0.0, 0.0}) C.set(i, j, a * (g[j] - g[i]));
    }
  }
  C.compress();
  return C;
}

cvec random_probe(int n, unsigned long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  cvec v(n);
  for (auto& z : v) z = {unif(rng), unif(rng)};
  double vn = norm2(v);
  for (auto& z : v) z /= vn;
  return v;
}

LinOp lin_scaled_sum(std::vector<std::pair<double, LinOp>> terms, int n) {
  auto fwd = [terms, n](const cvec& x, cvec& y) {
    y.assign(n, {0.0, 0.0});
    cvec t;
    for (const auto& [c, op] : terms) {
      op.apply(x, t);
      for (int i = 0; i < n; ++i) y[i] += c * t[i];
    }
  };
  auto adj = [terms, n](const cvec& x, cvec& y) {
    y.assign(n, {0.0, 0.0});
    cvec t;
    for (const auto& [c, op] : terms) {
      op.apply_adj(x, t);
      for (int i = 0; i < n; ++i) y[i] += c * t[i];
    }
  };
  return {n, fwd, adj};
}

/// Least squares slope k of log(norm) against log(h): norm ~ C h^k.
double power_fit(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 2) throw std::invalid_argument("power_fit: need >= 2 points");
  double sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (const auto& [h, v] : pts) {
    double x = std::log(h), y = std::log(v);
    sx += x;
    sxx += x * x;
    sy += y;
    sxy += x * y;
  }
  double n = static_cast<double>(pts.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

GluedModels build_glued_models(const Profile& p, const Potential& V, double h,
                               int m, cplx lambda, const Grid1D& grid,
                               const AbsorberSpec& absorber) {
  if (p.kind() != ProfileKind::double_well)
    throw std::invalid_argument("glued models need a double_well profile");
  double s0 = p.params().at(0);
  double seg = s0 / 7.0;
  if (seg / grid.ds < 50.0)
    throw std::invalid_argument(
        "grid-too-coarse: fewer than 50 nodes per s0/7 segment");

  GluedModels gm;
  gm.h = h;
  gm.m = m;
  gm.lambda = lambda;
  gm.s0 = s0;
  gm.grid = grid;
  // The base operator carries the phase-space barrier over the elliptic
  // region: without it, wavefronts cross s = 0 freely under the compact
  // model resolvent and the iterated remainder chains stay open.
  QuantizedSymbol W =
      quantize_symbol(BarrierSpec::standard(s0).symbol(), h, grid, 1e-6);
  gm.P = build_mode_operator(p, V, h, m, lambda, grid, &absorber, &W);

  gm.W0 = sample(grid, [&](double s) { return ramp_up(std::abs(s), 5 * seg, 6 * seg); });
  gm.W1 = sample(grid, [&](double s) { return ramp_down(std::abs(s), seg, 2 * seg); });
  gm.chi0 = sample(grid, [&](double s) { return ramp_down(std::abs(s), 3 * seg, 4 * seg); });
  gm.chi1.resize(grid.n);
  for (int j = 0; j < grid.n; ++j) gm.chi1[j] = 1.0 - gm.chi0[j];
  // Envelopes shifted outward/inward by one segment so that the commutator
  // supports clear the partition cutoffs and g_j W_j = 0 on the nodes.
  gm.g0 = sample(grid, [&](double s) { return ramp_down(std::abs(s), 4 * seg, 5 * seg); });
  gm.g1 = sample(grid, [&](double s) { return ramp_up(std::abs(s), 2 * seg, 3 * seg); });

  gm.P0 = gm.P;
  gm.P0.mat = add_diag_barrier(gm.P.mat, gm.W0);
  gm.P0.has_barrier = true;
  gm.P1 = gm.P;
  gm.P1.mat = add_diag_barrier(gm.P.mat, gm.W1);
  gm.P1.has_barrier = true;

  gm.C0 = commutator_with_diag(gm.P.mat, gm.g0);
  gm.C1 = commutator_with_diag(gm.P.mat, gm.g1);

  for (const ModeOperator* op : {&gm.P0, &gm.P1}) {
    double res = 0.0;
    solve(*op, random_probe(grid.n, 7), &res);
    if (res > 1e-8)
      throw std::runtime_error("model probe solve residual too large");
  }
  return gm;
}

Parametrix::Parametrix(const GluedModels& models)
    : models_(&models), lu0_(models.P0.mat), lu1_(models.P1.mat) {}

cvec Parametrix::F(const cvec& v) const {
  const GluedModels& gm = *models_;
  int n = gm.grid.n;
  cvec a(n), b(n), out(n);
  for (int i = 0; i < n; ++i) {
    a[i] = gm.chi0[i] * v[i];
    b[i] = gm.chi1[i] * v[i];
  }
  lu0_.solve(a);
  lu1_.solve(b);
  for (int i = 0; i < n; ++i) out[i] = gm.g0[i] * a[i] + gm.g1[i] * b[i];
  return out;
}

cvec Parametrix::A(int j, const cvec& v) const {
  const GluedModels& gm = *models_;
  int n = gm.grid.n;
  const auto& chi = j == 0 ? gm.chi0 : gm.chi1;
  const BandedLU& lu = j == 0 ? lu0_ : lu1_;
  const BandedMatrix& C = j == 0 ? gm.C0 : gm.C1;
  cvec t(n), out;
  for (int i = 0; i < n; ++i) t[i] = chi[i] * v[i];
  lu.solve(t);
  C.matvec(t, out);
  return out;
}

LinOp Parametrix::F_op() const {
  const GluedModels& gm = *models_;
  int n = gm.grid.n;
  LinOp t0 = LinOp::compose(
      LinOp::diagonal(gm.g0),
      LinOp::compose(LinOp::inverse(&lu0_), LinOp::diagonal(gm.chi0)));
  LinOp t1 = LinOp::compose(
      LinOp::diagonal(gm.g1),
      LinOp::compose(LinOp::inverse(&lu1_), LinOp::diagonal(gm.chi1)));
  return lin_scaled_sum({{1.0, t0}, {1.0, t1}}, n);
}

LinOp Parametrix::A_op(int j) const {
  const GluedModels& gm = *models_;
  const BandedLU& lu = j == 0 ? lu0_ : lu1_;
  return LinOp::compose(
      LinOp::from_banded(j == 0 ? &gm.C0 : &gm.C1),
      LinOp::compose(LinOp::inverse(&lu),
                     LinOp::diagonal(j == 0 ? gm.chi0 : gm.chi1)));
}

cvec build_parametrix(const GluedModels& models, const cvec& rhs) {
  return Parametrix(models).F(rhs);
}

GluingReport verify_gluing(const Profile& p, const Potential& V,
                           const std::vector<double>& h_list, cplx lambda,
                           double mu_star, unsigned long seed) {
  GluingReport report;
  report.seed = seed;
  AbsorberSpec absorber;

  for (double h : h_list) {
    GluingRow row;
    row.h = h;
    row.m = static_cast<int>(std::round(mu_star / h));
    try {
      Grid1D grid = Grid1D::make(p.domain_half_width(), h);
      GluedModels gm =
          build_glued_models(p, V, h, row.m, lambda, grid, absorber);
      Parametrix par(gm);
      int n = grid.n;

      LinOp A0 = par.A_op(0), A1 = par.A_op(1);
      LinOp Pop = LinOp::from_banded(&gm.P.mat);
      LinOp Fop = par.F_op();

      // Exact algebra on probes: (P - lambda) F v = v + A0 v + A1 v.
      for (int k = 0; k < 4; ++k) {
        cvec v = random_probe(n, seed + 11 * k);
        cvec Fv, PFv, a0, a1;
        Fop.apply(v, Fv);
        Pop.apply(Fv, PFv);
        A0.apply(v, a0);
        A1.apply(v, a1);
        double num = 0, den = std::max(1.0, norm2(PFv));
        cvec r(n);
        for (int i = 0; i < n; ++i) r[i] = PFv[i] - v[i] - a0[i] - a1[i];
        num = norm2(r);
        row.exact_identity_rel = std::max(row.exact_identity_rel, num / den);

        // Iterated identity, with A = A0 + A1:
        // (P - l) F (Id - A + A^2 - A^3) v = v - A^4 v.
        // This holds as matrix algebra; the mixed four-letter words
        // A1A0A1A0 and A0A1A0A1 dominate A^4 because the squares A_j^2
        // carry only the far tail of the barrier kernel.
        cvec Av(n), A2v, A3v, A4v, t0, t1;
        for (int i = 0; i < n; ++i) Av[i] = a0[i] + a1[i];
        A0.apply(Av, t0);
        A1.apply(Av, t1);
        A2v.resize(n);
        for (int i = 0; i < n; ++i) A2v[i] = t0[i] + t1[i];
        A0.apply(A2v, t0);
        A1.apply(A2v, t1);
        A3v.resize(n);
        for (int i = 0; i < n; ++i) A3v[i] = t0[i] + t1[i];
        A0.apply(A3v, t0);
        A1.apply(A3v, t1);
        A4v.resize(n);
        for (int i = 0; i < n; ++i) A4v[i] = t0[i] + t1[i];
        cvec arg(n);
        for (int i = 0; i < n; ++i)
          arg[i] = v[i] - Av[i] + A2v[i] - A3v[i];
        cvec Farg, PFarg;
        Fop.apply(arg, Farg);
        Pop.apply(Farg, PFarg);
        for (int i = 0; i < n; ++i) r[i] = PFarg[i] - v[i] + A4v[i];
        row.iterated_identity_rel = std::max(
            row.iterated_identity_rel, norm2(r) / std::max(1.0, norm2(PFarg)));
      }

      double tol = 1e-3;
      int max_iter = 3000;
      row.norm_A0 = operator_norm(A0, tol, max_iter, seed + 1).norm;
      row.norm_A1 = operator_norm(A1, tol, max_iter, seed + 2).norm;
      row.norm_A0_sq =
          operator_norm(LinOp::compose(A0, A0), tol, max_iter, seed + 3).norm;
      row.norm_A1_sq =
          operator_norm(LinOp::compose(A1, A1), tol, max_iter, seed + 4).norm;
      row.norm_A0A1 =
          operator_norm(LinOp::compose(A0, A1), tol, max_iter, seed + 5).norm;

      std::vector<double> chi(n);
      for (int i = 0; i < n; ++i) {
        double s = grid.node(i);
        chi[i] = plateau_bump(s, -3.2, -2.8, 2.8, 3.2);
      }
      LinOp chi_op = LinOp::diagonal(chi);
      LinOp chi0_op = LinOp::diagonal(gm.chi0);

      LinOp A0A1 = LinOp::compose(A0, A1);
      LinOp A1A0 = LinOp::compose(A1, A0);
      row.norm_A1A0A1A0_chi =
          operator_norm(LinOp::compose(A1A0, LinOp::compose(A1A0, chi0_op)),
                        tol, max_iter, seed + 6)
              .norm;
      row.norm_A0A1A0A1 =
          operator_norm(LinOp::compose(A0A1, A0A1), tol, max_iter, seed + 7)
              .norm;

      // Parametrix-based vs direct truncated resolvent norm, with the
      // corrector Id - A + A^2 - A^3 in Horner form (A = A0 + A1).
      LinOp Asum = lin_scaled_sum({{1.0, A0}, {1.0, A1}}, n);
      LinOp corr = lin_scaled_sum(
          {{1.0, LinOp::identity(n)}, {-1.0, Asum}}, n);
      for (int k = 0; k < 2; ++k)
        corr = lin_scaled_sum({{1.0, LinOp::identity(n)},
                               {-1.0, LinOp::compose(Asum, corr)}},
                              n);
      LinOp par_full = LinOp::compose(
          chi_op, LinOp::compose(Fop, LinOp::compose(corr, chi_op)));
      row.parametrix_norm = operator_norm(par_full, tol, max_iter, seed + 8).norm;

      BandedLU lu(gm.P.mat);
      LinOp direct = LinOp::compose(
          chi_op, LinOp::compose(LinOp::inverse(&lu), chi_op));
      row.direct_norm = operator_norm(direct, tol, max_iter, seed + 9).norm;
      row.discrepancy = std::abs(row.parametrix_norm - row.direct_norm) /
                        std::max(row.direct_norm, 1e-300);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }

  std::vector<std::pair<double, double>> pts01, pts_iter;
  for (const auto& r : report.rows) {
    if (!r.error.empty()) continue;
    if (r.norm_A0A1 > 0) pts01.emplace_back(r.h, r.norm_A0A1);
    double it = r.norm_A1A0A1A0_chi + r.norm_A0A1A0A1;
    if (it > 0) pts_iter.emplace_back(r.h, it);
  }
  if (pts01.size() >= 3 && pts_iter.size() >= 3) {
    report.decay_A0A1 = power_fit(pts01);
    report.decay_iterated = power_fit(pts_iter);
    report.fits_ok = true;
  }
  return report;
}

}  // namespace reslab
