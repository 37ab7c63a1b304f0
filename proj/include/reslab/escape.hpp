#pragma once

#include <string>
#include <vector>

#include "reslab/dynamics.hpp"
#include "reslab/profile.hpp"

namespace reslab {

/// Nested phase-plane regions around a hyperbolic orbit:
/// Gamma in V1 within U1 within U0 within V0 within U.
struct EscapeRegions {
  RegionSpec V1, U1, U0, V0, U;

  /// Concentric boxes centered at (s_star, 0) with the given half-widths.
  static EscapeRegions boxes(double s_star, double hw_V1, double hw_U1,
                             double hw_U0, double hw_V0, double hw_U);
  /// Throws unless the Lemma-style nesting holds with positive margin.
  void check_nesting() const;
};

/// Decreasing profile along a tube: 0 before the V1 exit, strictly
/// decreasing with floor -(2N)^{-1} between the V1 and V0 exits, and
/// identically -2 after the V0 exit plus eps.
struct TubeProfile {
  double T_V1 = 0, T_V0 = 0, T_U = 0;
  double eps = 0.25;
  double a1 = 0, a2 = 0;  // step amplitudes, a1 + a2 = 2
  double chi(double t) const;
  double dchi(double t) const;  // <= 0, psi-flat at support edges
};

struct Tube {
  PhasePoint seed;
  double t_seed = 0;     // time of the seed along its flowout branch
  int branch = 0;        // index into the flowout branches
  double tau_s = 0, tau_sig = 0;  // unit flow direction at the seed
  double n_s = 0, n_sig = 0;      // unit section direction (normal to flow)
  double r = 0.06;       // section radius
  double r_core = 0.036; // phi = 1 for |y| <= r_core
  TubeProfile prof;
  double phi(double y) const;
};

struct BranchSample {
  double t, s, sigma;
};

/// One flowout branch of the hyperbolic orbit: the forward trajectory
/// started just off the saddle along the unstable direction, with the
/// times at which it exits each nested region.
struct FlowoutBranch {
  std::vector<BranchSample> samples;
  double t_exit_V1 = 0, t_exit_U1 = 0, t_exit_U0 = 0, t_exit_V0 = 0,
         t_exit_U = 0;
  /// Position at branch time t (linear interpolation between samples).
  BranchSample at(double t) const;
};

struct EscapeBuildOptions {
  double seed_radius = 0.06;
  double dt = 2e-3;
  int grid_n = 61;
  double E = 1.0;
  double branch_offset = 1e-4;  // start distance from the saddle
  double gamma_box_shrink = 8.0;  // Gamma-box = V1 shrunk by this factor
};

/// The escape function q = chi_q(s, sigma) f(q_tilde) on the reduced phase
/// plane, with q_tilde a sum of tube terms chi_rho(t) phi_rho(y).
/// Evaluation recovers the flow coordinates (y, t) of every tube by
/// integrating a trajectory through the query point and locating its
/// transversal-section crossings, so H_p q is available in closed form.
class EscapeFunction {
 public:
  struct Eval {
    double q = 0, Hpq = 0, q_tilde = 0, Hpq_tilde = 0, chi_q = 0, f_val = 0;
  };

  Eval evaluate(double s, double sigma) const;

  int seed_count() const { return static_cast<int>(tubes_.size()); }
  const std::vector<Tube>& tubes() const { return tubes_; }
  const std::vector<FlowoutBranch>& branches() const { return branches_; }
  const EscapeRegions& regions() const { return regions_; }
  const RegionSpec& gamma_box() const { return gamma_box_; }
  const ClosedOrbit& orbit() const { return orbit_; }
  double energy_shell() const { return opt_.E; }
  const EscapeBuildOptions& options() const { return opt_; }
  const Profile& profile() const { return *profile_; }
  const Potential& potential() const { return *potential_; }

  /// Euclidean distance to the sampled flowout (branches plus the orbit).
  double distance_to_flowout(double s, double sigma) const;

  struct GridDump {
    int n = 0;
    double s_lo = 0, s_hi = 0, sig_lo = 0, sig_hi = 0;
    std::vector<double> q, Hpq;  // row-major, n x n
  };
  /// q and H_p q over a grid covering U with a margin.
  GridDump grid() const;

 private:
  friend EscapeFunction build_escape_function(const Profile&, const Potential&,
                                              const ClosedOrbit&,
                                              const EscapeRegions&,
                                              const EscapeBuildOptions&);
  const Profile* profile_ = nullptr;
  const Potential* potential_ = nullptr;
  ClosedOrbit orbit_;
  EscapeRegions regions_;
  EscapeBuildOptions opt_;
  RegionSpec gamma_box_;
  std::vector<FlowoutBranch> branches_;
  std::vector<Tube> tubes_;
  // chi_q plateau and support boxes
  double pl_s_lo = 0, pl_s_hi = 0, pl_sig_lo = 0, pl_sig_hi = 0;
  double chi_q(double s, double sigma) const;
  void Hp_chi_q(double s, double sigma, double* val, double* Hp) const;
  double f_of(double t) const;
  double df_of(double t) const;
  // f profile: f' = smoothstep^k over (-2, f_knee), f(t) = t + 1 beyond
  double f_knee_ = -0.6;
  double f_pow_ = 2.0;
  std::vector<double> f_table_;  // cumulative integral of f' on [-2, f_knee]
  void build_f_table();
};

/// Lemma-style construction: one tube per flowout branch (more if the
/// sampled cover check demands it), profiles floored at -(2N)^{-1}.
/// Throws construction-failed on cover failure and horizon-exceeded when a
/// branch never leaves U.
EscapeFunction build_escape_function(const Profile& p, const Potential& V,
                                     const ClosedOrbit& orbit,
                                     const EscapeRegions& regions,
                                     const EscapeBuildOptions& opt = {});

struct EscapeVerification {
  double max_Hpq_on_flowout = 0;   // over core tube samples (want <= 1e-10)
  double c_min = 0;                // min of -H_p q over annulus samples
  double sup_q_err_near_gamma = 0; // sup |q - 1| on the Gamma-box
  double sup_q_outside_U = 0;
  double q_tilde_floor = 0;        // min q_tilde over annulus samples
  double q_grid_min = 0, q_grid_max = 0;
  double max_sqrt_q_grad = 0;      // finite-difference gradient audits
  double max_sqrt_negHpq_grad = 0;
  bool monotone_along_flow = true;
  bool pass = false;
  std::vector<std::string> failures;
};

EscapeVerification verify_escape_function(const EscapeFunction& q,
                                          int n_samples = 1000);

/// Partition band in distance to the flowout: phi_- = 1 within d_in,
/// phi_+ = 1 beyond d_out, phi_+^2 + phi_-^2 = 1 exactly.
/// Zeros mean auto: d_out = half the smallest tube core radius,
/// d_in = 0.4 d_out.
struct CommutatorBand {
  double d_in = 0.0;
  double d_out = 0.0;
};

struct CommutatorDecomposition {
  EscapeFunction::GridDump base;   // the grid the symbols live on
  std::vector<double> b, e;        // b = phi_- sqrt(-H_p q^2), e = phi_+^2 H_p q^2
  double max_identity_residual = 0;  // |H_p q^2 + b^2 - e| pointwise
  double max_abs_e_near_flowout = 0; // e must vanish on the flowout band
  double max_b_outside_Uminus = 0;
};

CommutatorDecomposition commutator_decomposition(const EscapeFunction& q,
                                                 const CommutatorBand& band);

}  // namespace reslab
