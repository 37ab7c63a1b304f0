#include "reslab/escape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reslab/bump.hpp"

namespace reslab {

EscapeRegions EscapeRegions::boxes(double s_star, double hw_V1, double hw_U1,
                                   double hw_U0, double hw_V0, double hw_U) {
  EscapeRegions r;
  auto mk = [&](const char* role, double hw) {
    return RegionSpec::box(role, s_star - hw, s_star + hw, -hw, hw);
  };
  r.V1 = mk("V1", hw_V1);
  r.U1 = mk("U1", hw_U1);
  r.U0 = mk("U0", hw_U0);
  r.V0 = mk("V0", hw_V0);
  r.U = mk("U", hw_U);
  return r;
}

void EscapeRegions::check_nesting() const {
  const double m = 1e-6;
  if (!V1.nested_in(U1, m) || !U1.nested_in(U0, m) || !U0.nested_in(V0, m) ||
      !V0.nested_in(U, m))
    throw std::invalid_argument(
        "escape regions must nest: V1 in U1 in U0 in V0 in U");
}

double TubeProfile::chi(double t) const {
  double lo1 = T_V1 - 0.5, hi1 = T_V0 + eps / 2.0;
  double lo2 = hi1, hi2 = T_V0 + eps;
  return -a1 * smoothstep((t - lo1) / (hi1 - lo1)) -
         a2 * smoothstep((t - lo2) / (hi2 - lo2));
}

double TubeProfile::dchi(double t) const {
  double lo1 = T_V1 - 0.5, hi1 = T_V0 + eps / 2.0;
  double lo2 = hi1, hi2 = T_V0 + eps;
  return -a1 * dsmoothstep((t - lo1) / (hi1 - lo1)) / (hi1 - lo1) -
         a2 * dsmoothstep((t - lo2) / (hi2 - lo2)) / (hi2 - lo2);
}

double Tube::phi(double y) const { return radial_bump(y, r_core, r); }

BranchSample FlowoutBranch::at(double t) const {
  if (samples.empty()) throw std::logic_error("empty branch");
  if (t <= samples.front().t) return samples.front();
  if (t >= samples.back().t) return samples.back();
  size_t lo = 0, hi = samples.size() - 1;
  while (hi - lo > 1) {
    size_t mid = (lo + hi) / 2;
    if (samples[mid].t <= t) lo = mid; else hi = mid;
  }
  const auto& A = samples[lo];
  const auto& B = samples[hi];
  double w = (t - A.t) / (B.t - A.t);
  return {t, A.s + w * (B.s - A.s), A.sigma + w * (B.sigma - A.sigma)};
}

namespace {

struct St {
  double s, sig;
};

inline St deriv(const Profile& p, const Potential& V, double mu, const St& x) {
  return {2.0 * x.sig, -effective_potential_ds(p, V, mu, x.s)};
}

inline St rk4(const Profile& p, const Potential& V, double mu, const St& x,
              double dt) {
  St k1 = deriv(p, V, mu, x);
  St k2 = deriv(p, V, mu, {x.s + 0.5 * dt * k1.s, x.sig + 0.5 * dt * k1.sig});
  St k3 = deriv(p, V, mu, {x.s + 0.5 * dt * k2.s, x.sig + 0.5 * dt * k2.sig});
  St k4 = deriv(p, V, mu, {x.s + dt * k3.s, x.sig + dt * k3.sig});
  return {x.s + dt / 6.0 * (k1.s + 2 * k2.s + 2 * k3.s + k4.s),
          x.sig + dt / 6.0 * (k1.sig + 2 * k2.sig + 2 * k3.sig + k4.sig)};
}

struct TubeSample {
  double t, s, sig, y;
};

// Flows the section segment of a trial tube across its time window.
std::vector<TubeSample> flow_tube(const Profile& p, const Potential& V,
                                  double mu, const Tube& tube, double t_lo,
                                  double t_hi, double dt, int n_y) {
  std::vector<TubeSample> out;
  for (int j = 0; j < n_y; ++j) {
    double y = -tube.r + 2.0 * tube.r * j / (n_y - 1);
    St x0{tube.seed.s + y * tube.n_s, tube.seed.sigma + y * tube.n_sig};
    for (double dir : {-1.0, 1.0}) {
      St x = x0;
      double t = 0.0;
      out.push_back({t, x.s, x.sig, y});
      double span = dir < 0 ? -t_lo : t_hi;
      long n = static_cast<long>(std::ceil(span / dt));
      for (long i = 0; i < n; ++i) {
        x = rk4(p, V, mu, x, dir * dt);
        t += dir * dt;
        out.push_back({t, x.s, x.sig, y});
        if (std::abs(x.s) > p.domain_half_width()) break;
      }
    }
  }
  return out;
}

}  // namespace

void EscapeFunction::build_f_table() {
  // f' = smoothstep((t+2)/(knee+2))^k with k tuned so that f(knee) = knee+1.
  double L = f_knee_ + 2.0;
  double target = (f_knee_ + 1.0) / L;
  auto integral = [&](double k) {
    const int n = 2000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      double x0 = static_cast<double>(i) / n, x1 = static_cast<double>(i + 1) / n;
      double xm = 0.5 * (x0 + x1);
      acc += (std::pow(smoothstep(x0), k) + 4.0 * std::pow(smoothstep(xm), k) +
              std::pow(smoothstep(x1), k)) *
             (x1 - x0) / 6.0;
    }
    return acc;
  };
  double klo = 1.0, khi = 40.0;
  for (int it = 0; it < 60; ++it) {
    double km = 0.5 * (klo + khi);
    if (integral(km) > target) klo = km; else khi = km;
  }
  f_pow_ = 0.5 * (klo + khi);

  const int n = 4000;
  f_table_.assign(n + 1, 0.0);
  double prev = 0.0;
  for (int i = 1; i <= n; ++i) {
    double x0 = L * (i - 1) / n, x1 = L * i / n;
    double g0 = std::pow(smoothstep(x0 / L), f_pow_);
    double gm = std::pow(smoothstep((x0 + x1) / (2 * L)), f_pow_);
    double g1 = std::pow(smoothstep(x1 / L), f_pow_);
    prev += (g0 + 4 * gm + g1) * (x1 - x0) / 6.0;
    f_table_[i] = prev;
  }
  // Renormalize the tiny quadrature defect so f is continuous at the knee.
  double scale = (f_knee_ + 1.0) / f_table_[n];
  for (auto& v : f_table_) v *= scale;
}

double EscapeFunction::f_of(double t) const {
  if (t <= -2.0) return 0.0;
  if (t >= f_knee_) return t + 1.0;
  double L = f_knee_ + 2.0;
  double u = (t + 2.0) / L * (f_table_.size() - 1);
  size_t i = std::min(f_table_.size() - 2, static_cast<size_t>(u));
  double w = u - i;
  return f_table_[i] + w * (f_table_[i + 1] - f_table_[i]);
}

double EscapeFunction::df_of(double t) const {
  if (t <= -2.0) return 0.0;
  if (t >= f_knee_) return 1.0;
  return std::pow(smoothstep((t + 2.0) / (f_knee_ + 2.0)), f_pow_);
}

double EscapeFunction::chi_q(double s, double sigma) const {
  const auto& U = regions_.U.rects[0];
  return plateau_bump(s, U.s_lo, pl_s_lo, pl_s_hi, U.s_hi) *
         plateau_bump(sigma, U.sigma_lo, pl_sig_lo, pl_sig_hi, U.sigma_hi);
}

void EscapeFunction::Hp_chi_q(double s, double sigma, double* val,
                              double* Hp) const {
  const auto& U = regions_.U.rects[0];
  double Bs = plateau_bump(s, U.s_lo, pl_s_lo, pl_s_hi, U.s_hi);
  double Bg = plateau_bump(sigma, U.sigma_lo, pl_sig_lo, pl_sig_hi, U.sigma_hi);
  double dBs = dplateau_bump(s, U.s_lo, pl_s_lo, pl_s_hi, U.s_hi);
  double dBg = dplateau_bump(sigma, U.sigma_lo, pl_sig_lo, pl_sig_hi, U.sigma_hi);
  double sdot = 2.0 * sigma;
  double sigdot = -effective_potential_ds(*profile_, *potential_, orbit_.mu, s);
  *val = Bs * Bg;
  *Hp = sdot * dBs * Bg + sigdot * Bs * dBg;
}

EscapeFunction::Eval EscapeFunction::evaluate(double s, double sigma) const {
  Eval out;
  const auto& U = regions_.U.rects[0];
  bool outside_U =
      s <= U.s_lo || s >= U.s_hi || sigma <= U.sigma_lo || sigma >= U.sigma_hi;
  double margin = 0.3;
  if (outside_U &&
      (s <= U.s_lo - margin || s >= U.s_hi + margin ||
       sigma <= U.sigma_lo - margin || sigma >= U.sigma_hi + margin)) {
    return out;  // chi_q and its differential vanish here
  }

  double mu = orbit_.mu;
  struct Crossing {
    bool found = false;
    double y = 0, t = 0;
  };
  std::vector<Crossing> cr(tubes_.size());

  double back_span = 0.3, fwd_span = 0.3;
  for (const auto& tb : tubes_) {
    back_span = std::max(back_span, tb.prof.T_U + 1.3);
    fwd_span = std::max(fwd_span, 1.3 - (tb.prof.T_V1 - 1.0));
  }

  double dt = opt_.dt;
  for (double dir : {1.0, -1.0}) {
    St x{s, sigma};
    std::vector<double> c(tubes_.size());
    for (size_t k = 0; k < tubes_.size(); ++k)
      c[k] = (x.s - tubes_[k].seed.s) * tubes_[k].tau_s +
             (x.sig - tubes_[k].seed.sigma) * tubes_[k].tau_sig;
    double span = dir > 0 ? fwd_span : back_span;
    long n = static_cast<long>(std::ceil(span / dt));
    double tau = 0.0;
    for (long i = 0; i < n; ++i) {
      St xp = x;
      x = rk4(*profile_, *potential_, mu, x, dir * dt);
      tau += dir * dt;
      for (size_t k = 0; k < tubes_.size(); ++k) {
        if (cr[k].found) continue;
        const Tube& tb = tubes_[k];
        double cn = (x.s - tb.seed.s) * tb.tau_s +
                    (x.sig - tb.seed.sigma) * tb.tau_sig;
        if (c[k] * cn < 0 || cn == 0.0) {
          // refine the section crossing within this step
          double h_lo = 0.0, h_hi = dt;
          St a = xp;
          double ca = c[k];
          for (int it = 0; it < 30; ++it) {
            double hm = 0.5 * (h_lo + h_hi);
            St m = rk4(*profile_, *potential_, mu, xp, dir * hm);
            double cm = (m.s - tb.seed.s) * tb.tau_s +
                        (m.sig - tb.seed.sigma) * tb.tau_sig;
            if (ca * cm <= 0) { h_hi = hm; }
            else { h_lo = hm; a = m; ca = cm; }
          }
          double hm = 0.5 * (h_lo + h_hi);
          St xc = rk4(*profile_, *potential_, mu, xp, dir * hm);
          double y = (xc.s - tb.seed.s) * tb.n_s +
                     (xc.sig - tb.seed.sigma) * tb.n_sig;
          double t_tube = -(tau - dir * dt + dir * hm);
          if (std::abs(y) < tb.r && t_tube > tb.prof.T_V1 - 1.0 + 1e-9 &&
              t_tube < tb.prof.T_U + 1.0 - 1e-9) {
            cr[k].found = true;
            cr[k].y = y;
            cr[k].t = t_tube;
          }
        }
        c[k] = cn;
      }
      if (std::abs(x.s) > profile_->domain_half_width()) break;
      bool all = true;
      for (const auto& c1 : cr) all = all && c1.found;
      if (all) break;
    }
  }

  double qt = 0.0, Hpqt = 0.0;
  for (size_t k = 0; k < tubes_.size(); ++k) {
    if (!cr[k].found) continue;
    double ph = tubes_[k].phi(cr[k].y);
    if (ph == 0.0) continue;
    qt += tubes_[k].prof.chi(cr[k].t) * ph;
    Hpqt += tubes_[k].prof.dchi(cr[k].t) * ph;
  }
  double cq, Hpcq;
  Hp_chi_q(s, sigma, &cq, &Hpcq);
  out.q_tilde = qt;
  out.Hpq_tilde = Hpqt;
  out.chi_q = cq;
  out.f_val = f_of(qt);
  out.q = cq * out.f_val;
  out.Hpq = Hpcq * out.f_val + cq * df_of(qt) * Hpqt;
  return out;
}

double EscapeFunction::distance_to_flowout(double s, double sigma) const {
  double d2 = std::hypot(s - orbit_.s_star, sigma);
  double best = d2;
  for (const auto& br : branches_)
    for (size_t i = 0; i < br.samples.size(); i += 4) {
      double d = std::hypot(s - br.samples[i].s, sigma - br.samples[i].sigma);
      best = std::min(best, d);
    }
  return best;
}

EscapeFunction::GridDump EscapeFunction::grid() const {
  GridDump g;
  const auto& U = regions_.U.rects[0];
  double ws = 0.15 * (U.s_hi - U.s_lo), wg = 0.15 * (U.sigma_hi - U.sigma_lo);
  g.n = opt_.grid_n;
  g.s_lo = U.s_lo - ws;
  g.s_hi = U.s_hi + ws;
  g.sig_lo = U.sigma_lo - wg;
  g.sig_hi = U.sigma_hi + wg;
  g.q.resize(static_cast<size_t>(g.n) * g.n);
  g.Hpq.resize(static_cast<size_t>(g.n) * g.n);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      double s = g.s_lo + (g.s_hi - g.s_lo) * i / (g.n - 1);
      double sg = g.sig_lo + (g.sig_hi - g.sig_lo) * j / (g.n - 1);
      Eval e = evaluate(s, sg);
      g.q[static_cast<size_t>(i) * g.n + j] = e.q;
      g.Hpq[static_cast<size_t>(i) * g.n + j] = e.Hpq;
    }
  return g;
}

EscapeFunction build_escape_function(const Profile& p, const Potential& V,
                                     const ClosedOrbit& orbit,
                                     const EscapeRegions& regions,
                                     const EscapeBuildOptions& opt) {
  regions.check_nesting();
  if (!regions.U1.contains(orbit.s_star, 0.0))
    throw std::invalid_argument("U1 must contain the orbit");

  EscapeFunction q;
  q.profile_ = &p;
  q.potential_ = &V;
  q.orbit_ = orbit;
  q.regions_ = regions;
  q.opt_ = opt;
  q.build_f_table();

  double vpp = effective_potential_dss(p, V, orbit.mu, orbit.s_star);
  const auto& V1r = regions.V1.rects[0];
  double hwV1 = 0.5 * (V1r.s_hi - V1r.s_lo);
  double gb = hwV1 / opt.gamma_box_shrink;
  q.gamma_box_ = RegionSpec::box("Gamma", orbit.s_star - gb, orbit.s_star + gb,
                                 -gb, gb);

  if (orbit.stability != Stability::hyperbolic) {
    // No flowout beyond the orbit itself: q reduces to the outer cutoff.
    const auto& V0r = regions.V0.rects[0];
    q.pl_s_lo = V0r.s_lo;
    q.pl_s_hi = V0r.s_hi;
    q.pl_sig_lo = V0r.sigma_lo;
    q.pl_sig_hi = V0r.sigma_hi;
    return q;
  }

  double lam = std::sqrt(-2.0 * vpp);
  double E = opt.E;

  // Flowout branches: start just off the saddle along the unstable
  // direction (delta_sigma = (lam/2) delta_s), staying exactly on the shell.
  for (double dir : {1.0, -1.0}) {
    FlowoutBranch br;
    double s0 = orbit.s_star + dir * opt.branch_offset;
    double e_rem = E - effective_potential(p, V, orbit.mu, s0);
    double sg0 = dir * std::sqrt(std::max(0.0, e_rem));
    St x{s0, sg0};
    double t = 0.0;
    br.samples.push_back({t, x.s, x.sig});
    bool inV1 = true, inU1 = true, inU0 = true, inV0 = true, inU = true;
    double t_left_U = -1.0;
    const double t_max = 500.0;
    while (t < t_max) {
      x = rk4(p, V, orbit.mu, x, opt.dt);
      t += opt.dt;
      br.samples.push_back({t, x.s, x.sig});
      if (inV1 && !regions.V1.contains(x.s, x.sig)) { br.t_exit_V1 = t; inV1 = false; }
      if (inU1 && !regions.U1.contains(x.s, x.sig)) { br.t_exit_U1 = t; inU1 = false; }
      if (inU0 && !regions.U0.contains(x.s, x.sig)) { br.t_exit_U0 = t; inU0 = false; }
      if (inV0 && !regions.V0.contains(x.s, x.sig)) { br.t_exit_V0 = t; inV0 = false; }
      if (regions.U.contains(x.s, x.sig)) {
        if (!inU) { inU = true; t_left_U = -1.0; }
      } else if (inU) {
        inU = false;
        t_left_U = t;
        br.t_exit_U = t;
      }
      if (!inU && t_left_U > 0 && t > t_left_U + 1.6) break;
      if (std::abs(x.s) > p.domain_half_width() - 0.05) break;
    }
    if (inU || t_left_U < 0)
      throw std::runtime_error(
          "horizon-exceeded: flowout branch never leaves U");
    q.branches_.push_back(std::move(br));
  }

  // One tube per branch, seeded just past the U1 exit, with section radius
  // and eps shrunk until the tube respects the region geometry.
  auto make_tube = [&](int bi, double t_seed) {
    const FlowoutBranch& br = q.branches_[bi];
    BranchSample sp = br.at(t_seed);
    Tube tb;
    tb.branch = bi;
    tb.t_seed = t_seed;
    tb.seed = {sp.s, sp.sigma, orbit.mu};
    double fs = 2.0 * sp.sigma;
    double fg = -effective_potential_ds(p, V, orbit.mu, sp.s);
    double fn = std::hypot(fs, fg);
    tb.tau_s = fs / fn;
    tb.tau_sig = fg / fn;
    tb.n_s = -tb.tau_sig;
    tb.n_sig = tb.tau_s;
    tb.prof.T_V1 = br.t_exit_V1 - t_seed;
    tb.prof.T_V0 = br.t_exit_V0 - t_seed;
    tb.prof.T_U = br.t_exit_U - t_seed;
    tb.r = opt.seed_radius;
    tb.r_core = 0.6 * tb.r;
    tb.prof.eps = 0.49;

    for (int iter = 0; iter < 60; ++iter) {
      auto samples = flow_tube(p, V, orbit.mu, tb, tb.prof.T_V1 - 1.0,
                               tb.prof.T_U + 1.0, opt.dt, 9);
      bool shrink_r = false, shrink_eps = false;
      for (const auto& smp : samples) {
        // gamma box must stay clear of the whole tube
        if (q.gamma_box_.contains(smp.s, smp.sig)) shrink_r = true;
        // tube up to T_V0 + eps stays well inside U
        if (smp.t <= tb.prof.T_V0 + tb.prof.eps) {
          const auto& Ur = regions.U.rects[0];
          bool inside = smp.s > Ur.s_lo + 0.05 && smp.s < Ur.s_hi - 0.05 &&
                        smp.sig > Ur.sigma_lo + 0.05 &&
                        smp.sig < Ur.sigma_hi - 0.05;
          if (!inside) {
            if (smp.t > tb.prof.T_V0) shrink_eps = true;
            else shrink_r = true;
          }
        }
        // the t = T_V0 slice avoids the closure of U0
        if (std::abs(smp.t - tb.prof.T_V0) < opt.dt) {
          const auto& r0 = regions.U0.rects[0];
          if (smp.s > r0.s_lo - 0.01 && smp.s < r0.s_hi + 0.01 &&
              smp.sig > r0.sigma_lo - 0.01 && smp.sig < r0.sigma_hi + 0.01)
            shrink_r = true;
        }
      }
      if (!shrink_r && !shrink_eps) return tb;
      if (shrink_eps) tb.prof.eps *= 0.7;
      if (shrink_r) { tb.r *= 0.7; tb.r_core = 0.6 * tb.r; }
      if (tb.r < 1e-3 || tb.prof.eps < 1e-3)
        throw std::runtime_error(
            "construction-failed: tube geometry does not fit the regions");
    }
    throw std::runtime_error("construction-failed: tube shrink loop diverged");
  };

  for (size_t bi = 0; bi < q.branches_.size(); ++bi) {
    const FlowoutBranch& br = q.branches_[bi];
    q.tubes_.push_back(make_tube(static_cast<int>(bi), br.t_exit_U1 + 0.01));
  }

  // Sampled cover check along each branch between the U1 and U exits.
  for (size_t bi = 0; bi < q.branches_.size(); ++bi) {
    const FlowoutBranch& br = q.branches_[bi];
    for (int pass = 0; pass < 8; ++pass) {
      double t_unc = -1.0;
      for (int i = 0; i <= 200; ++i) {
        double t = br.t_exit_U1 +
                   (br.t_exit_U - br.t_exit_U1) * i / 200.0;
        bool covered = false;
        for (const auto& tb : q.tubes_) {
          if (tb.branch != static_cast<int>(bi)) continue;
          double tt = t - tb.t_seed;
          if (tt > tb.prof.T_V1 - 0.45 && tt < tb.prof.T_U + 0.45)
            covered = true;
        }
        if (!covered) { t_unc = t; break; }
      }
      if (t_unc < 0) break;
      if (pass == 7)
        throw std::runtime_error(
            "construction-failed: cover failure on flowout branch");
      q.tubes_.push_back(make_tube(static_cast<int>(bi), t_unc));
    }
  }

  // Profile amplitudes use the realized seed count.
  int N = static_cast<int>(q.tubes_.size());
  for (auto& tb : q.tubes_) {
    auto& pr = tb.prof;
    double lo1 = pr.T_V1 - 0.5, hi1 = pr.T_V0 + pr.eps / 2.0;
    double beta_at_V0 = smoothstep((pr.T_V0 - lo1) / (hi1 - lo1));
    pr.a1 = 0.9 / (2.0 * N * beta_at_V0);
    pr.a2 = 2.0 - pr.a1;
  }

  // chi_q plateau: the V0 box united with every tube sample up to
  // T_V0 + eps, plus a margin; the support is the U box.
  const auto& V0r = regions.V0.rects[0];
  double slo = V0r.s_lo, shi = V0r.s_hi, glo = V0r.sigma_lo, ghi = V0r.sigma_hi;
  for (const auto& tb : q.tubes_) {
    auto samples = flow_tube(p, V, orbit.mu, tb, tb.prof.T_V1 - 1.0,
                             tb.prof.T_V0 + tb.prof.eps, opt.dt, 9);
    for (const auto& smp : samples) {
      if (smp.t > tb.prof.T_V0 + tb.prof.eps) continue;
      slo = std::min(slo, smp.s);
      shi = std::max(shi, smp.s);
      glo = std::min(glo, smp.sig);
      ghi = std::max(ghi, smp.sig);
    }
  }
  const double m = 0.02;
  q.pl_s_lo = slo - m;
  q.pl_s_hi = shi + m;
  q.pl_sig_lo = glo - m;
  q.pl_sig_hi = ghi + m;
  const auto& Ur = regions.U.rects[0];
  if (q.pl_s_lo <= Ur.s_lo || q.pl_s_hi >= Ur.s_hi ||
      q.pl_sig_lo <= Ur.sigma_lo || q.pl_sig_hi >= Ur.sigma_hi)
    throw std::runtime_error(
        "construction-failed: outer cutoff plateau does not fit inside U");
  return q;
}

EscapeVerification verify_escape_function(const EscapeFunction& q,
                                          int n_samples) {
  EscapeVerification rep;
  const auto& branches = q.branches();
  const auto& tubes = q.tubes();

  rep.max_Hpq_on_flowout = -1e300;
  rep.c_min = 1e300;
  rep.q_tilde_floor = 1e300;

  // Flowout-core samples across each tube window, plus annulus samples
  // between the U1 and U0 exits.
  int per_branch = std::max(
      50, n_samples / std::max(1, static_cast<int>(branches.size())));

  // Max sampled gradients of sqrt(q) and sqrt(-H_p q) along the branches.
  // For a smooth square root these converge as the sampling refines; a
  // kink (square root of a transversal zero) grows like 1/sqrt(step).
  auto sqrt_grads = [&](int per) {
    std::pair<double, double> g{0.0, 0.0};
    for (const auto& br : branches) {
      double t1 = br.t_exit_U + 0.4;
      double prev_sq = 0, prev_sh = 0, ps = 0, pg = 0;
      for (int i = 0; i <= per; ++i) {
        BranchSample sp = br.at(t1 * i / per);
        auto e = q.evaluate(sp.s, sp.sigma);
        double sq = std::sqrt(std::max(0.0, e.q));
        double sh = std::sqrt(std::max(0.0, -e.Hpq));
        if (i > 0) {
          double d = std::hypot(sp.s - ps, sp.sigma - pg);
          if (d > 1e-12) {
            g.first = std::max(g.first, std::abs(sq - prev_sq) / d);
            g.second = std::max(g.second, std::abs(sh - prev_sh) / d);
          }
        }
        prev_sq = sq;
        prev_sh = sh;
        ps = sp.s;
        pg = sp.sigma;
      }
    }
    return g;
  };
  auto grads_coarse = sqrt_grads(4 * per_branch);
  auto grads_fine = sqrt_grads(16 * per_branch);
  rep.max_sqrt_q_grad = grads_fine.first;
  rep.max_sqrt_negHpq_grad = grads_fine.second;
  bool sqrt_grads_stable =
      grads_fine.first <= 1.4 * grads_coarse.first + 1.0 &&
      grads_fine.second <= 1.4 * grads_coarse.second + 1.0;

  std::vector<double> q_along;  // for the monotonicity audit
  for (size_t bi = 0; bi < branches.size(); ++bi) {
    const auto& br = branches[bi];
    double t0 = 0.0, t1 = br.t_exit_U + 0.4;
    for (int i = 0; i <= per_branch; ++i) {
      double t = t0 + (t1 - t0) * i / per_branch;
      BranchSample sp = br.at(t);
      auto e = q.evaluate(sp.s, sp.sigma);
      rep.max_Hpq_on_flowout = std::max(rep.max_Hpq_on_flowout, e.Hpq);
      if (t >= br.t_exit_U1 && t <= br.t_exit_U0) {
        rep.c_min = std::min(rep.c_min, -e.Hpq);
        rep.q_tilde_floor = std::min(rep.q_tilde_floor, e.q_tilde);
      }
      q_along.push_back(e.q);
      if (i > 0 && q_along[q_along.size() - 1] >
                       q_along[q_along.size() - 2] + 1e-8)
        rep.monotone_along_flow = false;
    }
    q_along.clear();
  }

  // q = 1 on the Gamma box.
  const auto& gbx = q.gamma_box().rects[0];
  for (int i = 0; i <= 6; ++i)
    for (int j = 0; j <= 6; ++j) {
      double s = gbx.s_lo + (gbx.s_hi - gbx.s_lo) * i / 6.0;
      double sg = gbx.sigma_lo + (gbx.sigma_hi - gbx.sigma_lo) * j / 6.0;
      rep.sup_q_err_near_gamma = std::max(
          rep.sup_q_err_near_gamma, std::abs(q.evaluate(s, sg).q - 1.0));
    }

  // q = 0 outside U: ring of samples just outside the U box.
  const auto& Ur = q.regions().U.rects[0];
  for (int i = 0; i <= 40; ++i) {
    double w = static_cast<double>(i) / 40.0;
    double s = Ur.s_lo + (Ur.s_hi - Ur.s_lo) * w;
    rep.sup_q_outside_U = std::max(
        {rep.sup_q_outside_U,
         std::abs(q.evaluate(s, Ur.sigma_lo - 0.02).q),
         std::abs(q.evaluate(s, Ur.sigma_hi + 0.02).q),
         std::abs(q.evaluate(Ur.s_lo - 0.02,
                             Ur.sigma_lo + (Ur.sigma_hi - Ur.sigma_lo) * w).q),
         std::abs(q.evaluate(Ur.s_hi + 0.02,
                             Ur.sigma_lo + (Ur.sigma_hi - Ur.sigma_lo) * w).q)});
  }

  auto g = q.grid();
  rep.q_grid_min = 1e300;
  rep.q_grid_max = -1e300;
  for (double v : g.q) {
    rep.q_grid_min = std::min(rep.q_grid_min, v);
    rep.q_grid_max = std::max(rep.q_grid_max, v);
  }

  if (tubes.empty()) {
    rep.max_Hpq_on_flowout = 0;
    rep.c_min = 0;
    rep.q_tilde_floor = 0;
  }

  auto fail = [&](const std::string& s) { rep.failures.push_back(s); };
  if (rep.max_Hpq_on_flowout > 1e-10)
    fail("H_p q > 1e-10 on flowout samples");
  if (!(rep.c_min > 1e-4)) fail("no strict decrease on the annulus");
  if (rep.sup_q_err_near_gamma > 1e-10) fail("q != 1 on the Gamma box");
  if (rep.sup_q_outside_U > 1e-12) fail("q != 0 outside U");
  if (rep.q_tilde_floor < -0.5 - 1e-9) fail("q_tilde floor violated");
  if (rep.q_grid_min < -1e-12 || rep.q_grid_max > 1.0 + 1e-12)
    fail("q out of [0, 1] on the grid");
  if (!sqrt_grads_stable) fail("square-root gradient audit blew up");
  if (!rep.monotone_along_flow) fail("q increases along the flow");
  rep.pass = rep.failures.empty();
  return rep;
}

CommutatorDecomposition commutator_decomposition(const EscapeFunction& q,
                                                 const CommutatorBand& band) {
  CommutatorBand bnd = band;
  if (bnd.d_out == 0.0) {
    double rc = 0.05;
    for (const auto& tb : q.tubes()) rc = std::min(rc, tb.r_core);
    bnd.d_out = 0.5 * rc;
    bnd.d_in = 0.4 * bnd.d_out;
  }
  if (!(bnd.d_in > 0 && bnd.d_out > bnd.d_in))
    throw std::invalid_argument("partition-infeasible: need 0 < d_in < d_out");
  CommutatorDecomposition out;
  out.base = q.grid();
  size_t n = out.base.q.size();
  out.b.assign(n, 0.0);
  out.e.assign(n, 0.0);
  int gn = out.base.n;
  for (int i = 0; i < gn; ++i)
    for (int j = 0; j < gn; ++j) {
      size_t idx = static_cast<size_t>(i) * gn + j;
      double s = out.base.s_lo + (out.base.s_hi - out.base.s_lo) * i / (gn - 1);
      double sg =
          out.base.sig_lo + (out.base.sig_hi - out.base.sig_lo) * j / (gn - 1);
      double qv = out.base.q[idx], hv = out.base.Hpq[idx];
      double hpq2 = 2.0 * qv * hv;  // H_p (q^2)
      double d = q.distance_to_flowout(s, sg);
      double beta = smoothstep((d - bnd.d_in) / (bnd.d_out - bnd.d_in));
      double neg = std::max(0.0, -hpq2);
      double b = std::sqrt((1.0 - beta) * neg);
      double e = beta * hpq2;
      out.b[idx] = b;
      out.e[idx] = e;
      out.max_identity_residual =
          std::max(out.max_identity_residual, std::abs(hpq2 + b * b - e));
      if (d <= bnd.d_in)
        out.max_abs_e_near_flowout =
            std::max(out.max_abs_e_near_flowout, std::abs(e));
      if (d >= bnd.d_out)
        out.max_b_outside_Uminus = std::max(out.max_b_outside_Uminus, b);
    }
  return out;
}

}  // namespace reslab
