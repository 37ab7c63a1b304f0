#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "reslab/profile.hpp"

namespace reslab {

/// Reduced phase-space state (s, sigma) at fixed Clairaut invariant mu.
struct PhasePoint {
  double s = 0.0;
  double sigma = 0.0;
  double mu = 0.0;
};

/// p(s, sigma; mu) = sigma^2 + mu^2 / a(s)^2 + V(s).
double energy(const Profile& p, const Potential& V, const PhasePoint& pt);

enum class ExitReason { horizon, left_domain, entered_absorber_region };

struct TrajectorySample {
  double t, s, sigma;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double mu = 0.0;
  double energy_drift = 0.0;
  ExitReason exit_reason = ExitReason::horizon;

  const TrajectorySample& back() const { return samples.back(); }
};

enum class Stability { hyperbolic, elliptic, degenerate };

std::string to_string(Stability s);

/// Latitude closed orbit (s = s_star, sigma = 0) on the shell p = E.
struct ClosedOrbit {
  double s_star = 0.0;
  double mu = 0.0;
  double E = 1.0;
  Stability stability = Stability::degenerate;
};

/// Finite union of axis-aligned rectangles in the (s, sigma) plane.
struct RegionSpec {
  struct Rect {
    double s_lo, s_hi, sigma_lo, sigma_hi;
  };
  std::string role;
  std::vector<Rect> rects;

  static RegionSpec box(std::string role, double s_lo, double s_hi,
                        double sigma_lo, double sigma_hi) {
    return RegionSpec{std::move(role), {{s_lo, s_hi, sigma_lo, sigma_hi}}};
  }
  bool contains(double s, double sigma) const {
    for (const auto& r : rects)
      if (s >= r.s_lo && s <= r.s_hi && sigma >= r.sigma_lo &&
          sigma <= r.sigma_hi)
        return true;
    return false;
  }
  bool contains(const PhasePoint& p) const { return contains(p.s, p.sigma); }
  /// True if every point of this region lies in `outer` with the given margin.
  bool nested_in(const RegionSpec& outer, double margin,
                 int grid = 64) const;
};

struct EscapeTimes {
  double T_V1 = 0.0;
  double T_V0 = 0.0;
  double T_U = 0.0;
};

enum class PointClassKind {
  elliptic_off_shell,
  backward_nontrapped,
  forward_flowout,
  trapped,
  undetermined_at_horizon,
};

std::string to_string(PointClassKind k);

struct PointClass {
  PointClassKind kind = PointClassKind::undetermined_at_horizon;
  int orbit_id = -1;  // index into the orbit census when kind is flowout/trapped
  Trajectory witness;
};

struct FlowOptions {
  double drift_tol = 1e-6;
  double domain_limit = 0.0;  // 0 means the profile's half-width
  int sample_stride = 1;      // keep every k-th step (endpoints always kept)
};

/// Fixed-step classical RK4 integration of sdot = 2 sigma,
/// sigmadot = -d/ds V_eff(s; mu).  Negative T integrates backward.
/// Stops early with exit_reason = left_domain when |s| exceeds the domain.
Trajectory flow(const Profile& p, const Potential& V, const PhasePoint& pt,
                double T, double dt, const FlowOptions& opt = {});

/// All latitude orbits on the shell p = E with stability labels,
/// both signs of mu.  A profile whose V_eff is critical on a whole
/// interval yields a single orbit labeled degenerate.
std::vector<ClosedOrbit> classify_orbits(const Profile& p, const Potential& V,
                                         double E);

struct ClassifyOptions {
  double E = 1.0;
  double shell_tol = 1e-6;
  double horizon = 200.0;
  double escape_radius = 0.0;  // 0 means domain half-width minus 1
  double orbit_tol = 1e-3;
  double dt = 1e-3;
};

/// Classifies a phase point against the orbit census of its energy shell.
/// barrier may be null; when present, a backward trajectory meeting
/// {barrier > 1/2} counts as escaped.
PointClass classify_point(const Profile& p, const Potential& V,
                          const PhasePoint& pt,
                          const std::function<double(double, double)>& barrier,
                          const ClassifyOptions& opt = {});

/// Escape times of the forward trajectory from pt through the nested
/// regions V1 within V0 within U: first exit from V1, first exit from V0,
/// last time inside the closure of U.  Times resolved to dt by bisection.
/// Throws horizon-exceeded when the trajectory never leaves U.
EscapeTimes escape_times(const Profile& p, const Potential& V,
                         const PhasePoint& pt, const RegionSpec& V1,
                         const RegionSpec& V0, const RegionSpec& U,
                         double horizon = 200.0, double dt = 1e-3);

enum class ConvexityMode {
  decreasing_observable,  // x decreasing in s: turning points are maxima of x
  outside_wells,          // sign(s) sddot > 0 for |s| > s0
  between_wells,          // sign(s) sddot < 0 for 0 < |s| < s0
};

struct ConvexityReport {
  bool holds = true;
  bool vacuous = false;
  std::vector<PhasePoint> witnesses;  // turning points violating the sign
};

/// Samples shell turning points (sigma = 0) in the region's s-range and
/// checks the strict sign of sddot = -2 d/ds V_eff required by the mode.
ConvexityReport check_convexity(const Profile& p, const Potential& V,
                                const RegionSpec& region, ConvexityMode mode,
                                double E = 1.0, double s0 = 0.0,
                                int n_samples = 400);

}  // namespace reslab
