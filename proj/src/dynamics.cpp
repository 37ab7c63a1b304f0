#include "reslab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reslab {

double energy(const Profile& p, const Potential& V, const PhasePoint& pt) {
  double a = p.a(pt.s);
  return pt.sigma * pt.sigma + pt.mu * pt.mu / (a * a) + V(pt.s);
}

std::string to_string(Stability s) {
  switch (s) {
    case Stability::hyperbolic: return "hyperbolic";
    case Stability::elliptic: return "elliptic";
    case Stability::degenerate: return "degenerate";
  }
  return "degenerate";
}

std::string to_string(PointClassKind k) {
  switch (k) {
    case PointClassKind::elliptic_off_shell: return "elliptic_off_shell";
    case PointClassKind::backward_nontrapped: return "backward_nontrapped";
    case PointClassKind::forward_flowout: return "forward_flowout";
    case PointClassKind::trapped: return "trapped";
    case PointClassKind::undetermined_at_horizon:
      return "undetermined_at_horizon";
  }
  return "undetermined_at_horizon";
}

bool RegionSpec::nested_in(const RegionSpec& outer, double margin,
                           int grid) const {
  for (const auto& r : rects)
    for (int i = 0; i <= grid; ++i)
      for (int j = 0; j <= grid; ++j) {
        double s = r.s_lo + (r.s_hi - r.s_lo) * i / grid;
        double sig = r.sigma_lo + (r.sigma_hi - r.sigma_lo) * j / grid;
        bool inside = false;
        for (const auto& o : outer.rects)
          if (s >= o.s_lo + margin && s <= o.s_hi - margin &&
              sig >= o.sigma_lo + margin && sig <= o.sigma_hi - margin)
            inside = true;
        if (!inside) return false;
      }
  return true;
}

namespace {

struct State {
  double s, sigma;
};

inline State deriv(const Profile& p, const Potential& V, double mu,
                   const State& x) {
  return {2.0 * x.sigma, -effective_potential_ds(p, V, mu, x.s)};
}

inline State rk4_step(const Profile& p, const Potential& V, double mu,
                      const State& x, double dt) {
  State k1 = deriv(p, V, mu, x);
  State k2 = deriv(p, V, mu, {x.s + 0.5 * dt * k1.s, x.sigma + 0.5 * dt * k1.sigma});
  State k3 = deriv(p, V, mu, {x.s + 0.5 * dt * k2.s, x.sigma + 0.5 * dt * k2.sigma});
  State k4 = deriv(p, V, mu, {x.s + dt * k3.s, x.sigma + dt * k3.sigma});
  return {x.s + dt / 6.0 * (k1.s + 2 * k2.s + 2 * k3.s + k4.s),
          x.sigma + dt / 6.0 * (k1.sigma + 2 * k2.sigma + 2 * k3.sigma + k4.sigma)};
}

}  // namespace

Trajectory flow(const Profile& p, const Potential& V, const PhasePoint& pt,
                double T, double dt, const FlowOptions& opt) {
  if (dt <= 0) throw std::invalid_argument("flow: dt must be positive");
  if (!std::isfinite(T)) throw std::invalid_argument("flow: T must be finite");
  double limit = opt.domain_limit > 0 ? opt.domain_limit
                                      : p.domain_half_width();
  if (std::abs(pt.s) > limit)
    throw std::invalid_argument("flow: start point outside domain");

  Trajectory traj;
  traj.mu = pt.mu;
  double sign = T >= 0 ? 1.0 : -1.0;
  double h = sign * dt;
  long n_steps = static_cast<long>(std::ceil(std::abs(T) / dt));
  double E0 = energy(p, V, pt);

  State x{pt.s, pt.sigma};
  double t = 0.0;
  traj.samples.push_back({t, x.s, x.sigma});
  int stride = std::max(1, opt.sample_stride);
  for (long i = 0; i < n_steps; ++i) {
    double step = h;
    if (std::abs(t + h) > std::abs(T)) step = T - t;
    x = rk4_step(p, V, pt.mu, x, step);
    t += step;
    double drift =
        std::abs(energy(p, V, {x.s, x.sigma, pt.mu}) - E0);
    traj.energy_drift = std::max(traj.energy_drift, drift);
    bool last = (i == n_steps - 1) || std::abs(x.s) > limit;
    if ((i + 1) % stride == 0 || last)
      traj.samples.push_back({t, x.s, x.sigma});
    if (std::abs(x.s) > limit) {
      traj.exit_reason = ExitReason::left_domain;
      if (traj.energy_drift > opt.drift_tol)
        throw std::runtime_error("integration-failed: energy drift exceeds tolerance");
      return traj;
    }
  }
  traj.exit_reason = ExitReason::horizon;
  if (traj.energy_drift > opt.drift_tol)
    throw std::runtime_error("integration-failed: energy drift exceeds tolerance");
  return traj;
}

std::vector<ClosedOrbit> classify_orbits(const Profile& p, const Potential& V,
                                         double E) {
  // A latitude orbit sits at sigma = 0, p = E: mu^2 = (E - V(s)) a(s)^2
  // with d/ds V_eff(s; mu) = 0, i.e. F(s) := V'(s) - 2 (E - V(s)) a'(s)/a(s) = 0.
  auto F = [&](double s) {
    return V.derivative(s) - 2.0 * (E - V(s)) * p.da(s) / p.a(s);
  };
  double S = p.domain_half_width();
  double lo = -S + 1e-6, hi = S - 1e-6;
  const int n = 8000;
  std::vector<double> roots;

  double max_abs = 0.0;
  std::vector<double> fs(n + 1);
  for (int i = 0; i <= n; ++i) {
    fs[i] = F(lo + (hi - lo) * i / n);
    max_abs = std::max(max_abs, std::abs(fs[i]));
  }
  std::vector<ClosedOrbit> orbits;
  if (max_abs < 1e-12) {
    // V_eff critical on the whole line: degenerate continuum.
    double mu2 = (E - V(0.0)) * p.a(0.0) * p.a(0.0);
    if (mu2 >= 0) {
      double mu = std::sqrt(mu2);
      orbits.push_back({0.0, mu, E, Stability::degenerate});
      if (mu > 1e-9)
        orbits.push_back({0.0, -mu, E, Stability::degenerate});
    }
    return orbits;
  }
  for (int i = 0; i < n; ++i) {
    if (fs[i] == 0.0 && (i == 0 || fs[i - 1] * fs[i + 1] != 0.0))
      roots.push_back(lo + (hi - lo) * i / n);
    else if (fs[i] * fs[i + 1] < 0) {
      double a = lo + (hi - lo) * i / n, b = lo + (hi - lo) * (i + 1) / n;
      double fa = fs[i];
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (a + b), fm = F(mid);
        if (fa * fm <= 0) b = mid; else { a = mid; fa = fm; }
      }
      roots.push_back(0.5 * (a + b));
    }
  }
  for (double s_star : roots) {
    double mu2 = (E - V(s_star)) * p.a(s_star) * p.a(s_star);
    if (mu2 < -1e-12) continue;
    mu2 = std::max(mu2, 0.0);
    double mu = std::sqrt(mu2);
    double vpp = effective_potential_dss(p, V, mu, s_star);
    Stability st = std::abs(vpp) < 1e-8 ? Stability::degenerate
                   : vpp < 0            ? Stability::hyperbolic
                                        : Stability::elliptic;
    orbits.push_back({s_star, mu, E, st});
    if (mu > 1e-9) orbits.push_back({s_star, -mu, E, st});
  }
  std::sort(orbits.begin(), orbits.end(), [](const auto& a, const auto& b) {
    return a.s_star != b.s_star ? a.s_star < b.s_star : a.mu < b.mu;
  });
  return orbits;
}

namespace {

enum class LegOutcome { escaped, converged, horizon };

// Integrates in the given time direction; reports escape (domain/radius/
// barrier), convergence to a candidate orbit (within orbit_tol at horizon),
// or neither.
LegOutcome run_leg(const Profile& p, const Potential& V, const PhasePoint& pt,
                   double direction, const ClassifyOptions& opt,
                   const std::function<double(double, double)>& barrier,
                   const std::vector<ClosedOrbit>& candidates,
                   double escape_radius, int* converged_orbit) {
  State x{pt.s, pt.sigma};
  double t = 0.0;
  long n_steps = static_cast<long>(std::ceil(opt.horizon / opt.dt));
  for (long i = 0; i < n_steps; ++i) {
    x = rk4_step(p, V, pt.mu, x, direction * opt.dt);
    t += opt.dt;
    if (std::abs(x.s) > escape_radius) return LegOutcome::escaped;
    if (direction < 0 && barrier && barrier(x.s, x.sigma) > 0.5)
      return LegOutcome::escaped;
  }
  for (size_t k = 0; k < candidates.size(); ++k) {
    double d = std::hypot(x.s - candidates[k].s_star, x.sigma);
    if (d < opt.orbit_tol) {
      if (converged_orbit) *converged_orbit = static_cast<int>(k);
      return LegOutcome::converged;
    }
  }
  return LegOutcome::horizon;
}

}  // namespace

PointClass classify_point(const Profile& p, const Potential& V,
                          const PhasePoint& pt,
                          const std::function<double(double, double)>& barrier,
                          const ClassifyOptions& opt) {
  PointClass out;
  double E_pt = energy(p, V, pt);
  if (std::abs(E_pt - opt.E) > opt.shell_tol) {
    out.kind = PointClassKind::elliptic_off_shell;
    return out;
  }
  double escape_radius = opt.escape_radius > 0
                             ? opt.escape_radius
                             : p.domain_half_width() - 1.0;
  auto census = classify_orbits(p, V, opt.E);
  std::vector<ClosedOrbit> candidates;
  std::vector<int> candidate_ids;
  for (size_t k = 0; k < census.size(); ++k)
    if (std::abs(census[k].mu - pt.mu) <= 1e-6) {
      candidates.push_back(census[k]);
      candidate_ids.push_back(static_cast<int>(k));
    }

  // Exactly on an orbit: a fixed point of the reduced flow.
  for (size_t k = 0; k < candidates.size(); ++k)
    if (std::hypot(pt.s - candidates[k].s_star, pt.sigma) < 1e-9) {
      out.kind = PointClassKind::trapped;
      out.orbit_id = candidate_ids[k];
      return out;
    }

  int orb_b = -1, orb_f = -1;
  LegOutcome back = run_leg(p, V, pt, -1.0, opt, barrier, candidates,
                            escape_radius, &orb_b);
  LegOutcome fwd = run_leg(p, V, pt, +1.0, opt, nullptr, candidates,
                           escape_radius, &orb_f);

  if (back == LegOutcome::converged && fwd == LegOutcome::converged) {
    out.kind = PointClassKind::trapped;
    out.orbit_id = candidate_ids[orb_b];
  } else if (back == LegOutcome::converged || fwd == LegOutcome::converged) {
    // Flowout of the orbit: convergence in one time direction, escape or
    // horizon in the other.
    out.kind = PointClassKind::forward_flowout;
    out.orbit_id =
        candidate_ids[back == LegOutcome::converged ? orb_b : orb_f];
  } else if (back == LegOutcome::escaped) {
    out.kind = PointClassKind::backward_nontrapped;
  } else {
    out.kind = PointClassKind::undetermined_at_horizon;
  }
  out.witness = flow(p, V, pt, std::min(opt.horizon, 20.0), opt.dt,
                     {1e-6, 0.0, 16});
  return out;
}

EscapeTimes escape_times(const Profile& p, const Potential& V,
                         const PhasePoint& pt, const RegionSpec& V1,
                         const RegionSpec& V0, const RegionSpec& U,
                         double horizon, double dt) {
  EscapeTimes out;
  State x{pt.s, pt.sigma};
  double t = 0.0;
  bool have_v1 = !V1.contains(pt.s, pt.sigma);
  bool have_v0 = !V0.contains(pt.s, pt.sigma);
  if (have_v1) out.T_V1 = 0.0;
  if (have_v0) out.T_V0 = 0.0;
  double last_in_U = U.contains(pt.s, pt.sigma) ? 0.0
                                                : -1.0;
  if (last_in_U < 0)
    throw std::invalid_argument("escape_times: point not inside U");

  auto bisect = [&](const RegionSpec& R, State a, double ta, State b,
                    double tb) {
    // a inside, b outside; refine the crossing to dt/2^20.
    for (int it = 0; it < 24; ++it) {
      double tm = 0.5 * (ta + tb);
      State m = rk4_step(p, V, pt.mu, a, tm - ta);
      if (R.contains(m.s, m.sigma)) { a = m; ta = tm; }
      else { b = m; tb = tm; }
    }
    return 0.5 * (ta + tb);
  };

  long n_steps = static_cast<long>(std::ceil(horizon / dt));
  bool left_U = false;
  double T_U = 0.0;
  for (long i = 0; i < n_steps; ++i) {
    State prev = x;
    double t_prev = t;
    x = rk4_step(p, V, pt.mu, x, dt);
    t += dt;
    if (!have_v1 && !V1.contains(x.s, x.sigma)) {
      out.T_V1 = bisect(V1, prev, t_prev, x, t);
      have_v1 = true;
    }
    if (!have_v0 && !V0.contains(x.s, x.sigma)) {
      out.T_V0 = bisect(V0, prev, t_prev, x, t);
      have_v0 = true;
    }
    bool in_U = U.contains(x.s, x.sigma);
    if (!in_U && U.contains(prev.s, prev.sigma))
      T_U = bisect(U, prev, t_prev, x, t);
    if (in_U) left_U = false;
    else left_U = true;
    if (left_U && std::abs(x.s) > p.domain_half_width()) break;
  }
  if (!left_U)
    throw std::runtime_error(
        "horizon-exceeded: trajectory never leaves U within horizon");
  out.T_U = T_U;
  if (!have_v0) out.T_V0 = out.T_U;
  if (!have_v1) out.T_V1 = out.T_V0;
  return out;
}

ConvexityReport check_convexity(const Profile& p, const Potential& V,
                                const RegionSpec& region, ConvexityMode mode,
                                double E, double s0, int n_samples) {
  ConvexityReport rep;
  int tested = 0;
  for (const auto& r : region.rects) {
    if (r.sigma_lo > 0 || r.sigma_hi < 0) continue;  // no turning points
    for (int i = 0; i <= n_samples; ++i) {
      double s = r.s_lo + (r.s_hi - r.s_lo) * i / n_samples;
      if (!p.in_domain(s)) continue;
      double mu2 = (E - V(s)) * p.a(s) * p.a(s);
      if (mu2 <= 0) continue;  // shell has no turning point at this s
      double mu = std::sqrt(mu2);
      double sddot = -2.0 * effective_potential_ds(p, V, mu, s);
      bool ok = true;
      switch (mode) {
        case ConvexityMode::decreasing_observable:
          // x decreasing in s: xddot = x' sddot < 0 requires sddot > 0.
          ok = sddot > 0;
          break;
        case ConvexityMode::outside_wells:
          if (std::abs(s) <= s0) continue;
          ok = (s > 0 ? sddot : -sddot) > 0;
          break;
        case ConvexityMode::between_wells:
          if (std::abs(s) < 1e-6 || std::abs(s) >= s0) continue;
          ok = (s > 0 ? sddot : -sddot) < 0;
          break;
      }
      ++tested;
      if (!ok) {
        rep.holds = false;
        if (rep.witnesses.size() < 32)
          rep.witnesses.push_back({s, 0.0, mu});
      }
    }
  }
  rep.vacuous = (tested == 0);
  return rep;
}

}  // namespace reslab
