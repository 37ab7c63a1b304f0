#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace reslab {

enum class ProfileKind {
  catenoid,
  hyperbolic_cylinder,
  double_well,
  nontrapping_monotone,
  custom,
};

std::string to_string(ProfileKind k);
ProfileKind profile_kind_from_string(const std::string& name);

/// Warp function a(s) of a surface of revolution R_s x S^1_theta with
/// metric ds^2 + a(s)^2 dtheta^2, on the truncated domain [-S, S].
/// a, a' and a'' are closed-form evaluators; a(s) >= a_min > 0 on the domain.
class Profile {
 public:
  using Fn = std::function<double(double)>;

  static Profile make(ProfileKind kind, const std::vector<double>& params,
                      double S = 8.0);
  static Profile make_custom(Fn a, Fn da, Fn dda, double S,
                             const std::vector<double>& params = {});

  double a(double s) const { return a_(s); }
  double da(double s) const { return da_(s); }
  double dda(double s) const { return dda_(s); }

  ProfileKind kind() const { return kind_; }
  const std::vector<double>& params() const { return params_; }
  double domain_half_width() const { return S_; }
  bool in_domain(double s) const { return s >= -S_ && s <= S_; }

  /// Positions of the latitude geodesics built into the profile
  /// (critical points of a). Empty for custom/degenerate warps.
  std::vector<double> critical_points() const;

 private:
  Profile() = default;
  ProfileKind kind_ = ProfileKind::custom;
  std::vector<double> params_;
  double S_ = 8.0;
  Fn a_, da_, dda_;
};

/// Compactly supported potential V(s), with derivative, zero outside
/// [support_lo, support_hi].
class Potential {
 public:
  using Fn = std::function<double(double)>;

  Potential() : V_([](double) { return 0.0; }), dV_([](double) { return 0.0; }),
                lo_(0.0), hi_(0.0) {}
  Potential(Fn V, Fn dV, double support_lo, double support_hi)
      : V_(std::move(V)), dV_(std::move(dV)), lo_(support_lo), hi_(support_hi) {}

  static Potential zero() { return Potential(); }

  double operator()(double s) const {
    return (s < lo_ || s > hi_) ? 0.0 : V_(s);
  }
  double derivative(double s) const {
    return (s < lo_ || s > hi_) ? 0.0 : dV_(s);
  }
  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }
  bool is_zero() const { return lo_ == 0.0 && hi_ == 0.0; }

 private:
  Fn V_, dV_;
  double lo_, hi_;
};

/// V_eff(s; mu) = mu^2 / a(s)^2 + V(s).
double effective_potential(const Profile& p, const Potential& V, double mu,
                           double s);
/// d/ds of the above.
double effective_potential_ds(const Profile& p, const Potential& V, double mu,
                              double s);
/// d^2/ds^2 of the above (V assumed to contribute via finite difference of dV).
double effective_potential_dss(const Profile& p, const Potential& V, double mu,
                               double s);

}  // namespace reslab
