#include "reslab/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "reslab/bump.hpp"
#include "reslab/dynamics.hpp"

namespace reslab {

namespace {

/// Unit erf step: 0 at -inf, 1 at +inf, transition scale delta.
double erf_step(double x, double delta) {
  return 0.5 * std::erfc(-x / (std::numbers::sqrt2 * delta));
}

}  // namespace

Grid1D Grid1D::make(double S, double h, double pts_per_h) {
  if (S <= 0 || h <= 0 || pts_per_h < 1)
    throw std::invalid_argument("Grid1D: bad parameters");
  Grid1D g;
  g.S = S;
  g.n = static_cast<int>(std::ceil(2.0 * S * pts_per_h / h)) + 1;
  g.ds = 2.0 * S / (g.n - 1);
  return g;
}

double AbsorberSpec::eta(double s, double S) const {
  double start = S * (1.0 - frac);
  return ramp_up(std::abs(s), start, S);
}

SymbolXS SymbolXS::spatial(std::function<double(double)> g) {
  SymbolXS sym;
  sym.sigma_independent = true;
  sym.f_s = std::move(g);
  sym.f = [fs = sym.f_s](double s, double) { return fs(s); };
  return sym;
}

SymbolXS SymbolXS::product(std::function<double(double)> gs,
                           std::function<double(double)> gsig,
                           double sigma_lo, double sigma_hi) {
  SymbolXS sym;
  sym.separable = true;
  sym.f_s = std::move(gs);
  sym.f_sig = std::move(gsig);
  sym.sigma_lo = sigma_lo;
  sym.sigma_hi = sigma_hi;
  sym.f = [fs = sym.f_s, fg = sym.f_sig](double s, double sig) {
    return fs(s) * fg(sig);
  };
  return sym;
}

SymbolXS SymbolXS::general(std::function<double(double, double)> g,
                           double sigma_lo, double sigma_hi) {
  SymbolXS sym;
  sym.f = std::move(g);
  sym.sigma_lo = sigma_lo;
  sym.sigma_hi = sigma_hi;
  return sym;
}

double SymbolXS::operator()(double s, double sigma) const {
  if (sigma_independent) return f_s(s);
  return f(s, sigma);
}

namespace {

/// Difference kernel kappa(k) = (ds / 2 pi h) Int e^{i sigma k ds / h}
/// g(sigma) dsigma for offsets k = 0..kmax, by composite Simpson.
std::vector<cplx> difference_kernel(const std::function<double(double)>& g,
                                    double sigma_lo, double sigma_hi, double h,
                                    double ds, int kmax) {
  double range = sigma_hi - sigma_lo;
  double max_phase = range * kmax * ds / h;
  int n_quad =
      std::max(1025, 2 * static_cast<int>(std::ceil(4.0 * max_phase)) + 1);
  if (n_quad % 2 == 0) ++n_quad;
  double dq = range / (n_quad - 1);
  std::vector<double> gv(n_quad);
  for (int i = 0; i < n_quad; ++i) gv[i] = g(sigma_lo + i * dq);

  std::vector<cplx> kappa(kmax + 1);
  double scale = ds / (2.0 * std::numbers::pi * h);
  for (int k = 0; k <= kmax; ++k) {
    double freq = k * ds / h;
    cplx acc{0.0, 0.0};
    for (int i = 0; i < n_quad; ++i) {
      double w = (i == 0 || i == n_quad - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      double sig = sigma_lo + i * dq;
      acc += w * gv[i] * std::polar(1.0, freq * sig);
    }
    kappa[k] = scale * acc * (dq / 3.0);
  }
  return kappa;
}

void window_apply(const BandedMatrix& mat, int offset, int full_n,
                  const cvec& x, cvec& y, bool adjoint) {
  int nw = mat.n();
  if (offset == 0 && nw == full_n) {
    adjoint ? mat.matvec_adj(x, y) : mat.matvec(x, y);
    return;
  }
  cvec xs(x.begin() + offset, x.begin() + offset + nw), ys;
  adjoint ? mat.matvec_adj(xs, ys) : mat.matvec(xs, ys);
  y.assign(full_n, {0.0, 0.0});
  std::copy(ys.begin(), ys.end(), y.begin() + offset);
}

int kernel_band(const std::vector<cplx>& kappa, double tol) {
  double kmax_abs = 0.0;
  for (const auto& z : kappa) kmax_abs = std::max(kmax_abs, std::abs(z));
  int band = 0;
  for (int k = 0; k < static_cast<int>(kappa.size()); ++k)
    if (std::abs(kappa[k]) > tol * kmax_abs) band = k;
  return band;
}

}  // namespace

void QuantizedSymbol::apply(const cvec& x, cvec& y) const {
  window_apply(mat, offset, full_n, x, y, false);
}

void QuantizedSymbol::apply_adj(const cvec& x, cvec& y) const {
  window_apply(mat, offset, full_n, x, y, true);
}

cplx QuantizedSymbol::at(int i, int j) const {
  int nw = mat.n();
  if (i < offset || j < offset || i >= offset + nw || j >= offset + nw)
    return {0.0, 0.0};
  return mat(i - offset, j - offset);
}

QuantizedSymbol quantize_symbol(const SymbolXS& sym, double h,
                                const Grid1D& grid, double band_tol) {
  if (band_tol <= 0 || band_tol > 1e-6)
    throw std::invalid_argument("quantize_symbol: band_tol outside (0, 1e-6]");
  QuantizedSymbol out;
  out.band_tol = band_tol;
  out.h = h;
  int n = grid.n;
  out.full_n = n;

  if (sym.sigma_independent) {
    BandedMatrix mat(n, 0, 0);
    for (int j = 0; j < n; ++j) mat.set(j, j, sym.f_s(grid.node(j)));
    out.mat = std::move(mat);
    return out;
  }

  if (sym.separable) {
    // One quadrature pass for the difference kernel; rows differ only by
    // the spatial factor at the midpoint.
    int kmax = 64;
    std::vector<cplx> kappa;
    for (;;) {
      kappa = difference_kernel(sym.f_sig, sym.sigma_lo, sym.sigma_hi, h,
                                grid.ds, kmax);
      int band = kernel_band(kappa, band_tol);
      if (band < kmax || kmax >= n - 1) break;
      kmax = std::min(n - 1, kmax * 2);
    }
    int band = std::min(kernel_band(kappa, band_tol), n - 1);
    // Index window: entry (i, j) needs the spatial factor nonzero at the
    // midpoint, so only nodes within band*ds/2 of supp f_s participate.
    int j_lo = n, j_hi = -1;
    double half = 0.5 * band * grid.ds;
    for (int j = 0; j < n; ++j) {
      double s = grid.node(j);
      bool live = false;
      for (int k = -4; k <= 4 && !live; ++k)
        if (sym.f_s(s + half * k / 4.0) != 0.0) live = true;
      if (live) {
        if (j < j_lo) j_lo = j;
        j_hi = j;
      }
    }
    if (j_hi < j_lo) {
      out.mat = BandedMatrix(1, 0, 0);
      out.offset = 0;
      out.full_n = n;
      return out;
    }
    int nw = j_hi - j_lo + 1;
    BandedMatrix mat(nw, std::min(band, nw - 1), std::min(band, nw - 1));
    int bw = std::min(band, nw - 1);
    for (int j = 0; j < nw; ++j) {
      int i_hi = std::min(nw - 1, j + bw);
      for (int i = j; i <= i_hi; ++i) {
        double mid = 0.5 * (grid.node(j_lo + i) + grid.node(j_lo + j));
        double fs = sym.f_s(mid);
        if (fs == 0.0) continue;
        cplx v = fs * kappa[i - j];
        mat.set(i, j, v);
        if (i != j) mat.set(j, i, std::conj(v));
      }
    }
    mat.compress();
    out.mat = std::move(mat);
    out.offset = j_lo;
    return out;
  }

  // General symbol: dense assembly then band truncation.  Quadratic cost,
  // intended for moderate grids.
  double range = sym.sigma_hi - sym.sigma_lo;
  double max_phase = range * (n - 1) * grid.ds / h;
  int n_quad =
      std::max(1025, 2 * static_cast<int>(std::ceil(4.0 * max_phase)) + 1);
  if (n_quad % 2 == 0) ++n_quad;
  double dq = range / (n_quad - 1);
  double scale = grid.ds / (2.0 * std::numbers::pi * h);
  BandedMatrix full(n, n - 1, n - 1);
  std::vector<double> gv(n_quad);
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      double mid = 0.5 * (grid.node(i) + grid.node(j));
      double freq = (i - j) * grid.ds / h;
      cplx acc{0.0, 0.0};
      for (int q = 0; q < n_quad; ++q) {
        double w = (q == 0 || q == n_quad - 1) ? 1.0 : (q % 2 == 1 ? 4.0 : 2.0);
        double sig = sym.sigma_lo + q * dq;
        acc += w * sym.f(mid, sig) * std::polar(1.0, freq * sig);
      }
      cplx v = scale * acc * (dq / 3.0);
      full.set(i, j, v);
      if (i != j) full.set(j, i, std::conj(v));
    }
  }
  out.mat = band_truncate(full, band_tol);
  out.mat.compress();
  return out;
}

double curvature_potential(const Profile& p, double s) {
  double a = p.a(s), da = p.da(s), dda = p.dda(s);
  return dda / (2.0 * a) - da * da / (4.0 * a * a);
}

ModeOperator build_mode_operator(const Profile& p, const Potential& V,
                                 double h, int m, cplx lambda,
                                 const Grid1D& grid,
                                 const AbsorberSpec* absorber,
                                 const QuantizedSymbol* barrier) {
  if (grid.ds > h / 8.0 + 1e-12)
    throw std::invalid_argument("grid-too-coarse: ds exceeds h/8");
  if (absorber) {
    if (absorber->frac <= 0 || absorber->frac >= 0.5)
      throw std::invalid_argument(
          "absorber-overlaps-features: frac outside (0, 1/2)");
  }
  if (barrier && barrier->full_n != grid.n)
    throw std::invalid_argument("barrier grid mismatch");

  int band = 1;
  if (barrier) band = std::max(band, std::max(barrier->mat.kl(),
                                              barrier->mat.ku()));
  ModeOperator op;
  op.h = h;
  op.m = m;
  op.lambda = lambda;
  op.grid = grid;
  op.has_absorber = absorber != nullptr;
  op.has_barrier = barrier != nullptr;
  op.mat = BandedMatrix(grid.n, band, band);

  double k2 = h * h / (grid.ds * grid.ds);
  double hm = h * m;
  for (int j = 0; j < grid.n; ++j) {
    double s = grid.node(j);
    double a = p.a(s);
    cplx d = 2.0 * k2 + hm * hm / (a * a) + h * h * curvature_potential(p, s) +
             V(s) - 1.0 - lambda;
    if (absorber)
      d -= cplx{0.0, absorber->strength * absorber->eta(s, grid.S)};
    op.mat.set(j, j, d);
    if (j > 0) op.mat.set(j, j - 1, -k2);
    if (j + 1 < grid.n) op.mat.set(j, j + 1, -k2);
  }
  if (barrier) {
    const BandedMatrix& W = barrier->mat;
    int off = barrier->offset, nw = W.n();
    for (int j = 0; j < nw; ++j) {
      int i_lo = std::max(0, j - W.ku()), i_hi = std::min(nw - 1, j + W.kl());
      for (int i = i_lo; i <= i_hi; ++i) {
        cplx w = W(i, j);
        if (w != cplx{0.0, 0.0})
          op.mat.add(off + i, off + j, cplx{0.0, -1.0} * w);
      }
    }
  }
  return op;
}

cvec solve(const ModeOperator& op, const cvec& rhs, double* residual) {
  BandedLU lu(op.mat);
  cvec x;
  double rel = lu.solve_refined(op.mat, rhs, x);
  if (residual) *residual = rel;
  return x;
}

CutoffOperator::CutoffOperator(SymbolXS a, std::function<double(double)> b,
                               double h, const Grid1D& grid, double band_tol)
    : b_(b ? std::move(b) : [](double) { return 1.0; }), h_(h) {
  shared_ = std::make_shared<QuantizedSymbol>(
      quantize_symbol(std::move(a), h, grid, band_tol));
}

LinOp CutoffOperator::op_for_mode(int m) const {
  double c = mode_factor(m);
  auto Q = shared_;
  return {Q->full_n,
          [Q, c](const cvec& x, cvec& y) {
            Q->apply(x, y);
            for (auto& z : y) z *= c;
          },
          [Q, c](const cvec& x, cvec& y) {
            Q->apply_adj(x, y);
            for (auto& z : y) z *= c;
          }};
}

LinOp CutoffOperator::base_op() const {
  auto Q = shared_;
  return {Q->full_n,
          [Q](const cvec& x, cvec& y) { Q->apply(x, y); },
          [Q](const cvec& x, cvec& y) { Q->apply_adj(x, y); }};
}

BarrierSpec BarrierSpec::standard(double s0) {
  BarrierSpec b;
  b.s0 = s0;
  b.s_edge = 0.40 * s0;
  b.s_delta = 0.013 * s0;
  b.sig_lo = -1.55;
  b.sig_hi = 0.47;
  b.sig_delta = 0.095;
  b.sigma_support_lo = b.sig_lo - 8.0 * b.sig_delta;
  b.sigma_support_hi = b.sig_hi + 8.0 * b.sig_delta;
  return b;
}

double BarrierSpec::w(double s, double sigma) const {
  double gs = erf_step(s_edge - std::abs(s), s_delta);
  double gsig = erf_step(sigma - sig_lo, sig_delta) *
                erf_step(sig_hi - sigma, sig_delta);
  return gs * gsig;
}

SymbolXS BarrierSpec::symbol() const {
  BarrierSpec b = *this;
  return SymbolXS::product(
      [b](double s) { return erf_step(b.s_edge - std::abs(s), b.s_delta); },
      [b](double sig) {
        return erf_step(sig - b.sig_lo, b.sig_delta) *
               erf_step(b.sig_hi - sig, b.sig_delta);
      },
      sigma_support_lo, sigma_support_hi);
}

BarrierSpec::Audit BarrierSpec::audit(const Profile& p, const Potential& V,
                                      double E) const {
  Audit a;
  a.min_w_on_shell_band = 1.0;
  double sqE = std::sqrt(E);
  // Shell band: points (s ~ 0, sigma <= 0) on the shell for some mu.
  for (int i = 0; i <= 20; ++i) {
    double s = -0.05 + 0.005 * i;
    double top = E - V(s);
    if (top <= 0) continue;
    for (int j = 0; j <= 50; ++j) {
      double sig = -std::sqrt(top) * j / 50.0;
      a.min_w_on_shell_band = std::min(a.min_w_on_shell_band, w(s, sig));
    }
  }
  // Support: nothing outside {|s| < s0/2}.
  for (int i = 0; i <= 200; ++i) {
    double s = 0.5 * s0 + i * 0.005 * s0;
    for (int j = 0; j <= 80; ++j) {
      double sig = -2.0 + 0.05 * j;
      a.max_w_outside_support =
          std::max({a.max_w_outside_support, w(s, sig), w(-s, sig)});
    }
  }
  // Corridor: the rightward trajectories running between the warp minima
  // at +-s0, with |mu| = a(s0) sqrt(E).
  double mu_het = p.a(s0) * sqE;
  for (double mu : {mu_het, -mu_het}) {
    double s_start = -s0 + 1e-3;
    double sig2 = E - effective_potential(p, V, mu, s_start);
    if (sig2 <= 0) continue;
    PhasePoint pt{s_start, std::sqrt(sig2), mu};
    FlowOptions fo;
    fo.drift_tol = 1e-5;
    fo.domain_limit = p.domain_half_width();
    fo.sample_stride = 4;
    Trajectory tr = flow(p, V, pt, 60.0, 1e-3, fo);
    for (const auto& smp : tr.samples) {
      if (smp.s > s0 - 1e-3) break;
      a.max_w_on_corridor = std::max(a.max_w_on_corridor, w(smp.s, smp.sigma));
    }
  }
  a.pass = a.min_w_on_shell_band >= 1.0 - 1e-6 &&
           a.max_w_outside_support <= 1e-6 && a.max_w_on_corridor <= 1e-6;
  return a;
}

}  // namespace reslab
