#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace reslab {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

double norm2(const cvec& v);
cplx dot(const cvec& a, const cvec& b);  // conjugate-linear in a

/// Complex banded matrix in LAPACK band storage (column-major), with
/// kl sub- and ku super-diagonals.
class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(int n, int kl, int ku);

  int n() const { return n_; }
  int kl() const { return kl_; }
  int ku() const { return ku_; }

  cplx operator()(int i, int j) const {
    if (i - j > kl_ || j - i > ku_) return {0.0, 0.0};
    return data_[static_cast<size_t>(j) * ldab_ + (ku_ + i - j)];
  }
  void set(int i, int j, cplx v);
  void add(int i, int j, cplx v);

  void matvec(const cvec& x, cvec& y) const;      // y = A x
  void matvec_adj(const cvec& x, cvec& y) const;  // y = A* x

  /// max_ij |A(i,j) - conj(A(j,i))|.
  double hermitian_defect() const;
  /// Frobenius norm.
  double frobenius() const;

  const cvec& storage() const { return data_; }

  /// Records per-column nonzero row ranges so matvecs skip structurally
  /// zero columns (cutoff kernels are zero away from their spatial support).
  void compress();
  bool compressed() const { return !col_lo_.empty(); }

 private:
  int n_ = 0, kl_ = 0, ku_ = 0, ldab_ = 0;
  cvec data_;
  std::vector<int> col_lo_, col_hi_;  // inclusive; lo > hi means empty column
};

/// B = A with entries of modulus <= tol * max|A| dropped from the outer
/// diagonals (bandwidth shrunk where the whole diagonal is below threshold).
BandedMatrix band_truncate(const BandedMatrix& A, double tol);

/// LU factorization with partial pivoting of a banded matrix (zgbtrf),
/// exposing forward and adjoint solves.
class BandedLU {
 public:
  explicit BandedLU(const BandedMatrix& A);

  int n() const { return n_; }
  /// x := A^{-1} x (in place).
  void solve(cvec& x) const;
  /// x := A^{-*} x (in place).
  void solve_adj(cvec& x) const;

  /// Solves A x = b with iterative refinement against the given matrix;
  /// returns the final relative residual ||A x - b|| / ||b||.
  double solve_refined(const BandedMatrix& A, const cvec& b, cvec& x,
                       double tol = 1e-12, int max_refine = 6) const;

 private:
  int n_ = 0, kl_ = 0, ku_ = 0, ldab_ = 0;
  cvec lu_;
  std::vector<int> ipiv_;
};

/// Matrix-free linear operator on C^n with its adjoint.
struct LinOp {
  int n = 0;
  std::function<void(const cvec&, cvec&)> apply;
  std::function<void(const cvec&, cvec&)> apply_adj;

  static LinOp identity(int n);
  static LinOp from_banded(const BandedMatrix* A);
  static LinOp diagonal(const std::vector<double>& d);
  /// (A B) x = A (B x).
  static LinOp compose(LinOp A, LinOp B);
  static LinOp inverse(const BandedLU* lu);
};

struct PowerIterResult {
  double norm = 0.0;
  int iterations = 0;
  bool converged = false;
  double last_rel_change = 0.0;
};

/// Largest singular value of M via power iteration on M*M with a
/// deterministic seeded start vector.
PowerIterResult operator_norm(const LinOp& M, double tol = 1e-6,
                              int max_iter = 5000, unsigned long seed = 1);

}  // namespace reslab
