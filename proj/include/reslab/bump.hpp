#pragma once

#include <cmath>

namespace reslab {

/// psi(s) = exp(-1/s) for s > 0, 0 otherwise.  All the cutoffs below are
/// built from psi so that their square roots stay smooth at support edges.
inline double psi(double s) { return s > 0 ? std::exp(-1.0 / s) : 0.0; }

inline double dpsi(double s) {
  return s > 0 ? std::exp(-1.0 / s) / (s * s) : 0.0;
}

/// Smooth step: 0 for x <= 0, 1 for x >= 1, strictly increasing between.
inline double smoothstep(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double a = psi(x), b = psi(1.0 - x);
  return a / (a + b);
}

inline double dsmoothstep(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  double a = psi(x), b = psi(1.0 - x);
  double da = dpsi(x), db = dpsi(1.0 - x);
  double den = a + b;
  return (da * b + a * db) / (den * den);
}

/// 0 below x0, rises to 1 on [x0, x1], plateau on [x1, x2], falls to 0 on
/// [x2, x3].
inline double plateau_bump(double x, double x0, double x1, double x2,
                           double x3) {
  if (x <= x1) return smoothstep((x - x0) / (x1 - x0));
  if (x >= x2) return smoothstep((x3 - x) / (x3 - x2));
  return 1.0;
}

inline double dplateau_bump(double x, double x0, double x1, double x2,
                            double x3) {
  if (x < x1) return dsmoothstep((x - x0) / (x1 - x0)) / (x1 - x0);
  if (x > x2) return -dsmoothstep((x3 - x) / (x3 - x2)) / (x3 - x2);
  return 0.0;
}

/// Radial plateau bump: 1 for |y| <= r_core, 0 for |y| >= r, decaying like
/// psi(r^2 - y^2) at the outer edge.
inline double radial_bump(double y, double r_core, double r) {
  double u = (r * r - y * y) / (r * r - r_core * r_core);
  return smoothstep(u);
}

inline double ramp_up(double x, double x0, double x1) {
  return smoothstep((x - x0) / (x1 - x0));
}

inline double ramp_down(double x, double x0, double x1) {
  return smoothstep((x1 - x) / (x1 - x0));
}

}  // namespace reslab
