#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "reslab/banded.hpp"
#include "reslab/profile.hpp"

namespace reslab {

struct Grid1D {
  double S = 8.0;
  int n = 0;
  double ds = 0.0;
  double node(int j) const { return -S + j * ds; }
  /// Uniform grid with ds <= h / pts_per_h.
  static Grid1D make(double S, double h, double pts_per_h = 8.0);
};

/// Complex absorbing ramp at the domain ends: eta rises smoothly from 0 at
/// |s| = S (1 - frac) to 1 at |s| = S.
struct AbsorberSpec {
  double frac = 0.15;
  double strength = 1.0;
  double eta(double s, double S) const;
};

/// Phase-space symbol a(s, sigma).  Separable symbols carry their factors
/// so banded Weyl kernels reduce to a single difference-kernel quadrature.
struct SymbolXS {
  std::function<double(double, double)> f;
  bool sigma_independent = false;
  std::function<double(double)> f_s;    // spatial factor (or the whole symbol)
  std::function<double(double)> f_sig;  // sigma factor when separable
  bool separable = false;
  double sigma_lo = -2.0, sigma_hi = 2.0;

  static SymbolXS spatial(std::function<double(double)> g);
  static SymbolXS product(std::function<double(double)> gs,
                          std::function<double(double)> gsig,
                          double sigma_lo = -2.0, double sigma_hi = 2.0);
  static SymbolXS general(std::function<double(double, double)> g,
                          double sigma_lo = -2.0, double sigma_hi = 2.0);
  double operator()(double s, double sigma) const;
};

/// Banded kernel stored only on the index window [offset, offset + mat.n())
/// of the full grid; rows and columns outside the window are zero
/// (compactly supported spatial factors).
struct QuantizedSymbol {
  BandedMatrix mat;
  int offset = 0;
  int full_n = 0;
  double band_tol = 1e-6;
  double h = 0.0;

  /// y = K x on full-grid vectors.
  void apply(const cvec& x, cvec& y) const;
  void apply_adj(const cvec& x, cvec& y) const;
  /// Entry in full-grid indices.
  cplx at(int i, int j) const;
};

/// Banded Weyl quantization K(s_j, s_k) =
/// (2 pi h)^{-1} ds Int e^{i sigma (s_j - s_k)/h} a((s_j+s_k)/2, sigma) dsigma,
/// truncated where the kernel falls below band_tol relative to its peak.
/// Spatial-only symbols quantize exactly to diagonal matrices.
QuantizedSymbol quantize_symbol(const SymbolXS& sym, double h,
                                const Grid1D& grid, double band_tol = 1e-6);

/// Curvature potential from conjugating (1/a) d/ds (a d/ds .) by a^{1/2}:
/// a''/(2a) - (a')^2/(4 a^2).
double curvature_potential(const Profile& p, double s);

struct ModeOperator {
  double h = 0.1;
  int m = 0;
  cplx lambda{0.0, 0.0};
  Grid1D grid;
  BandedMatrix mat;
  bool has_absorber = false;
  bool has_barrier = false;
};

/// Symmetrized per-mode discretization of h^2 Delta_g + V - 1 - iW - lambda:
/// -h^2 D2 + diag(h^2 m^2 / a^2 + h^2 q_a + V - 1 - i C eta(s)) - lambda,
/// minus i times the quantized barrier when one is given.
ModeOperator build_mode_operator(const Profile& p, const Potential& V,
                                 double h, int m, cplx lambda,
                                 const Grid1D& grid,
                                 const AbsorberSpec* absorber,
                                 const QuantizedSymbol* barrier = nullptr);

/// Banded LU solve with iterative refinement; the relative residual is
/// reported through *residual when non-null.
cvec solve(const ModeOperator& op, const cvec& rhs, double* residual = nullptr);

/// Microlocal cutoff b(h m) Op(a): one quantized base matrix shared by all
/// modes, scaled per mode by the angular factor.
class CutoffOperator {
 public:
  CutoffOperator() = default;
  CutoffOperator(SymbolXS a, std::function<double(double)> b, double h,
                 const Grid1D& grid, double band_tol = 1e-6);

  double mode_factor(int m) const { return b_ ? b_(h_ * m) : 1.0; }
  bool active(int m) const { return mode_factor(m) != 0.0; }
  /// The per-mode operator b(h m) Op(a) as a matrix-free map.
  LinOp op_for_mode(int m) const;
  /// Op(a) without the angular factor.
  LinOp base_op() const;
  const QuantizedSymbol& base() const { return *shared_; }
  int n() const { return shared_->full_n; }

 private:
  std::function<double(double)> b_;
  double h_ = 0.1;
  std::shared_ptr<const QuantizedSymbol> shared_;  // keeps op_for_mode valid
};

/// Complex absorbing barrier symbol of the double-well example:
/// w = 1 on the shell band {s near 0, sigma <= 0}, supported in
/// {|s| < s0/2}, avoiding the rightward heteroclinic corridor.
/// Profiles are erf-mollified so the Weyl kernel has Gaussian band decay.
struct BarrierSpec {
  double s0 = 2.0;
  double s_edge = 0.0, s_delta = 0.0;        // spatial erf edges at +-s_edge
  double sig_lo = 0.0, sig_hi = 0.0, sig_delta = 0.0;  // sigma window edges
  double sigma_support_lo = -2.0, sigma_support_hi = 1.2;

  static BarrierSpec standard(double s0);
  double w(double s, double sigma) const;
  SymbolXS symbol() const;

  struct Audit {
    double min_w_on_shell_band = 0;   // want ~1
    double max_w_outside_support = 0; // want ~0
    double max_w_on_corridor = 0;     // want ~0
    bool pass = false;
  };
  /// Samples the shell band, the support complement, and the integrated
  /// rightward heteroclinic trajectories.
  Audit audit(const Profile& p, const Potential& V, double E = 1.0) const;
};

}  // namespace reslab
