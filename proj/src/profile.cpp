#include "reslab/profile.hpp"

#include <cmath>

namespace reslab {

std::string to_string(ProfileKind k) {
  switch (k) {
    case ProfileKind::catenoid: return "catenoid";
    case ProfileKind::hyperbolic_cylinder: return "hyperbolic_cylinder";
    case ProfileKind::double_well: return "double_well";
    case ProfileKind::nontrapping_monotone: return "nontrapping_monotone";
    case ProfileKind::custom: return "custom";
  }
  return "custom";
}

ProfileKind profile_kind_from_string(const std::string& name) {
  if (name == "catenoid") return ProfileKind::catenoid;
  if (name == "hyperbolic_cylinder") return ProfileKind::hyperbolic_cylinder;
  if (name == "double_well") return ProfileKind::double_well;
  if (name == "nontrapping_monotone") return ProfileKind::nontrapping_monotone;
  if (name == "custom") return ProfileKind::custom;
  throw std::invalid_argument("invalid-params: unknown profile kind '" + name + "'");
}

Profile Profile::make(ProfileKind kind, const std::vector<double>& params,
                      double S) {
  if (S <= 0) throw std::invalid_argument("invalid-params: S must be positive");
  Profile p;
  p.kind_ = kind;
  p.params_ = params;
  p.S_ = S;
  switch (kind) {
    case ProfileKind::catenoid: {
      p.a_ = [](double s) { return std::sqrt(1.0 + s * s); };
      p.da_ = [](double s) { return s / std::sqrt(1.0 + s * s); };
      p.dda_ = [](double s) { return 1.0 / std::pow(1.0 + s * s, 1.5); };
      break;
    }
    case ProfileKind::hyperbolic_cylinder: {
      double beta = params.empty() ? 0.3 : params[0];
      if (beta <= 0)
        throw std::invalid_argument("invalid-params: beta must be positive");
      p.a_ = [beta](double s) { return beta * std::cosh(s); };
      p.da_ = [beta](double s) { return beta * std::sinh(s); };
      p.dda_ = [beta](double s) { return beta * std::cosh(s); };
      break;
    }
    case ProfileKind::double_well: {
      // a(s) = 1 + g (cosh s - 1) + A exp(-s^2/w^2), with A fixed by
      // a'(s0) = 0.  This gives a strict local maximum at 0, strict
      // minima at +-s0, and a'' changing sign exactly twice.
      double s0 = params.size() > 0 ? params[0] : 2.0;
      double g = params.size() > 1 ? params[1] : 0.1;
      double w = params.size() > 2 ? params[2] : 1.5;
      if (s0 <= 0 || g <= 0 || w <= 0)
        throw std::invalid_argument(
            "invalid-params: double_well needs s0, g, w > 0");
      if (s0 >= S / 2)
        throw std::invalid_argument("invalid-params: s0 must be < S/2");
      double A = g * w * w * std::sinh(s0) * std::exp(s0 * s0 / (w * w)) /
                 (2.0 * s0);
      p.params_ = {s0, g, w};
      p.a_ = [g, A, w](double s) {
        return 1.0 + g * (std::cosh(s) - 1.0) + A * std::exp(-s * s / (w * w));
      };
      p.da_ = [g, A, w](double s) {
        return g * std::sinh(s) -
               2.0 * A * s / (w * w) * std::exp(-s * s / (w * w));
      };
      p.dda_ = [g, A, w](double s) {
        double e = std::exp(-s * s / (w * w));
        return g * std::cosh(s) +
               A * e * (4.0 * s * s / (w * w * w * w) - 2.0 / (w * w));
      };
      break;
    }
    case ProfileKind::nontrapping_monotone: {
      double a0 = params.size() > 0 ? params[0] : 1.0;
      double eps = params.size() > 1 ? params[1] : 0.25;
      if (a0 <= 0 || eps <= 0)
        throw std::invalid_argument(
            "invalid-params: nontrapping_monotone needs a0, eps > 0");
      p.a_ = [a0, eps](double s) { return a0 * std::exp(eps * s); };
      p.da_ = [a0, eps](double s) { return a0 * eps * std::exp(eps * s); };
      p.dda_ = [a0, eps](double s) {
        return a0 * eps * eps * std::exp(eps * s);
      };
      break;
    }
    case ProfileKind::custom:
      throw std::invalid_argument(
          "invalid-params: use make_custom for custom profiles");
  }
  return p;
}

Profile Profile::make_custom(Fn a, Fn da, Fn dda, double S,
                             const std::vector<double>& params) {
  if (S <= 0) throw std::invalid_argument("invalid-params: S must be positive");
  // Positivity check on a sampling grid.
  for (int i = 0; i <= 4096; ++i) {
    double s = -S + 2.0 * S * i / 4096.0;
    if (!(a(s) > 0))
      throw std::invalid_argument("invalid-params: custom profile has a <= 0");
  }
  Profile p;
  p.kind_ = ProfileKind::custom;
  p.params_ = params;
  p.S_ = S;
  p.a_ = std::move(a);
  p.da_ = std::move(da);
  p.dda_ = std::move(dda);
  return p;
}

std::vector<double> Profile::critical_points() const {
  switch (kind_) {
    case ProfileKind::catenoid:
    case ProfileKind::hyperbolic_cylinder:
      return {0.0};
    case ProfileKind::double_well:
      return {-params_[0], 0.0, params_[0]};
    default:
      return {};
  }
}

double effective_potential(const Profile& p, const Potential& V, double mu,
                           double s) {
  if (!p.in_domain(s)) throw std::out_of_range("s outside profile domain");
  double a = p.a(s);
  return mu * mu / (a * a) + V(s);
}

double effective_potential_ds(const Profile& p, const Potential& V, double mu,
                              double s) {
  double a = p.a(s);
  return -2.0 * mu * mu * p.da(s) / (a * a * a) + V.derivative(s);
}

double effective_potential_dss(const Profile& p, const Potential& V, double mu,
                               double s) {
  double a = p.a(s);
  double ap = p.da(s), app = p.dda(s);
  double geom = mu * mu *
                (6.0 * ap * ap / (a * a * a * a) - 2.0 * app / (a * a * a));
  // V'' by centered difference of the supplied derivative.
  const double dh = 1e-5;
  double vpp = V.is_zero()
                   ? 0.0
                   : (V.derivative(s + dh) - V.derivative(s - dh)) / (2 * dh);
  return geom + vpp;
}

}  // namespace reslab
