#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "reslab/banded.hpp"
#include "reslab/profile.hpp"
#include "reslab/quantize.hpp"

namespace reslab {

enum class Prediction {
  nontrapping_h_inv,
  log_loss,
  log2_loss,
  microlocal_h_inv,
  elliptic_blowup,
};
std::string to_string(Prediction p);

enum class LambdaKind {
  zero,              // lambda = 0, invertibility from the absorber
  im_h4,             // lambda = i h^4 stress mode
  eigenvalue_target, // per mode: real part of the eigenvalue nearest 0
};
std::string to_string(LambdaKind k);

/// One side of the truncation: b(h m) Op(a).  The spatial support bounds
/// are carried for mode policies and hypothesis audits.
struct CutoffSpec {
  SymbolXS a;
  std::function<double(double)> b;  // null means b == 1
  double s_lo = 0.0, s_hi = 0.0;    // spatial support of a
  std::string description;
};

struct ModePolicy {
  enum class Kind { active_shell, window, explicit_list };
  Kind kind = Kind::active_shell;
  double margin = 0.5;      // active_shell: |hm| <= mu_shell_max + margin
  double center = 0.0;      // window: | |hm| - center | <= halfwidth
  double halfwidth = 0.0;
  std::vector<int> modes;   // explicit_list
  int sentinels = 3;
};

struct AuditOutcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentSpec {
  std::string name;
  Profile profile;
  Potential potential;
  double E = 1.0;
  std::optional<BarrierSpec> barrier;
  CutoffSpec A, B;
  std::vector<double> h_list;
  LambdaKind lambda_kind = LambdaKind::zero;
  ModePolicy modes;
  Prediction prediction = Prediction::nontrapping_h_inv;
  AbsorberSpec absorber;
  double pts_per_h = 8.0;  // grid points per wavelength-scale h
  double power_tol = 1e-3;
  int max_power_iter = 3000;
  unsigned long seed = 20260823;
  std::vector<std::function<AuditOutcome(const ExperimentSpec&)>> audits;
};

struct ModeNorm {
  double norm = 0.0;
  int iterations = 0;
  bool converged = false;
  double solve_residual = 0.0;  // refined probe solve, self-certified
};

/// Largest singular value of A o solve(op, .) o B by power iteration on
/// M*M with banded forward and adjoint solves.
ModeNorm mode_resolvent_norm(const LinOp& A, const ModeOperator& op,
                             const LinOp& B, double tol = 1e-6,
                             int max_iter = 3000, unsigned long seed = 1);
ModeNorm mode_resolvent_norm(const LinOp& A, const BandedLU& lu,
                             const BandedMatrix& mat, const LinOp& B,
                             double tol = 1e-6, int max_iter = 3000,
                             unsigned long seed = 1);

struct ModeRun {
  int m = 0;             // signed argmax representative of the |m| pair
  double base_norm = 0;  // norm before the angular factors
  double norm = 0;
  int iterations = 0;
  bool converged = true;
  double solve_residual = 0;
  cplx lambda{0.0, 0.0};
};

struct NormAtH {
  double h = 0;
  double norm = 0;
  int m_star = 0;
  int iterations = 0;  // of the argmax mode
  bool all_converged = true;
  double max_solve_residual = 0;
  bool sentinels_ok = true;
  std::vector<ModeRun> modes;
  std::vector<ModeRun> sentinels;
  std::string error;
};

/// Max of mode_resolvent_norm over the policy's modes (signs folded into
/// the angular factors; the reduced operator depends on |m| only).
/// Sentinel modes outside the included set are audited against the max.
NormAtH resolvent_norm(const ExperimentSpec& spec, double h,
                       int n_threads = 1);

struct ScalingFit {
  double alpha = 0, beta = 0, c = 0, residual = 0;      // two-predictor fit
  double alpha_pure = 0, c_pure = 0, residual_pure = 0; // beta forced 0
  bool ok = false;
  /// The fit the prediction tag is judged by: two-predictor for the log
  /// families, pure power otherwise.
  double alpha_for(Prediction p) const;
};

/// Least squares of log N = alpha log(1/h) + beta log log(1/h) + c.
/// Throws on fewer than 4 distinct h with positive norms.
ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& rows);

struct SweepResult {
  std::string name;
  std::vector<NormAtH> rows;
  ScalingFit fit;
  bool fit_ok = false;
  std::string fit_error;
  unsigned long seed = 0;
  std::vector<AuditOutcome> audits;
  bool audits_pass = true;
  Prediction prediction = Prediction::nontrapping_h_inv;
};

/// Runs the audits, then one resolvent_norm row per h (failures recorded,
/// sweep continues), then the scaling fit.  Refuses to run on a failed
/// hypothesis audit unless force is set.
SweepResult run_sweep(const ExperimentSpec& spec, int n_threads = 1,
                      bool force = false);

/// Documented presets; throws unknown-preset otherwise.
ExperimentSpec preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace reslab
