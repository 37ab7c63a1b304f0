#include "reslab/banded.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace reslab {

double norm2(const cvec& v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

cplx dot(const cvec& a, const cvec& b) {
  cplx s{0.0, 0.0};
  for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

BandedMatrix::BandedMatrix(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), ldab_(kl + ku + 1) {
  if (n <= 0 || kl < 0 || ku < 0)
    throw std::invalid_argument("BandedMatrix: bad dimensions");
  data_.assign(static_cast<size_t>(n) * ldab_, {0.0, 0.0});
}

void BandedMatrix::set(int i, int j, cplx v) {
  if (i - j > kl_ || j - i > ku_)
    throw std::out_of_range("BandedMatrix::set outside band");
  data_[static_cast<size_t>(j) * ldab_ + (ku_ + i - j)] = v;
}

void BandedMatrix::add(int i, int j, cplx v) {
  if (i - j > kl_ || j - i > ku_)
    throw std::out_of_range("BandedMatrix::add outside band");
  data_[static_cast<size_t>(j) * ldab_ + (ku_ + i - j)] += v;
}

void BandedMatrix::compress() {
  col_lo_.assign(n_, 0);
  col_hi_.assign(n_, -1);
  for (int j = 0; j < n_; ++j) {
    int i_lo = std::max(0, j - ku_), i_hi = std::min(n_ - 1, j + kl_);
    const cplx* col = &data_[static_cast<size_t>(j) * ldab_];
    int lo = i_hi + 1, hi = i_lo - 1;
    for (int i = i_lo; i <= i_hi; ++i)
      if (col[ku_ + i - j] != cplx{0.0, 0.0}) {
        if (i < lo) lo = i;
        hi = i;
      }
    col_lo_[j] = lo;
    col_hi_[j] = hi;
  }
}

void BandedMatrix::matvec(const cvec& x, cvec& y) const {
  y.assign(n_, {0.0, 0.0});
  bool cmp = compressed();
  for (int j = 0; j < n_; ++j) {
    int i_lo = cmp ? col_lo_[j] : std::max(0, j - ku_);
    int i_hi = cmp ? col_hi_[j] : std::min(n_ - 1, j + kl_);
    if (i_lo > i_hi) continue;
    const cplx* col = &data_[static_cast<size_t>(j) * ldab_];
    cplx xj = x[j];
    for (int i = i_lo; i <= i_hi; ++i) y[i] += col[ku_ + i - j] * xj;
  }
}

void BandedMatrix::matvec_adj(const cvec& x, cvec& y) const {
  y.assign(n_, {0.0, 0.0});
  bool cmp = compressed();
  for (int j = 0; j < n_; ++j) {
    int i_lo = cmp ? col_lo_[j] : std::max(0, j - ku_);
    int i_hi = cmp ? col_hi_[j] : std::min(n_ - 1, j + kl_);
    if (i_lo > i_hi) continue;
    const cplx* col = &data_[static_cast<size_t>(j) * ldab_];
    cplx acc{0.0, 0.0};
    for (int i = i_lo; i <= i_hi; ++i)
      acc += std::conj(col[ku_ + i - j]) * x[i];
    y[j] += acc;
  }
}

double BandedMatrix::hermitian_defect() const {
  double d = 0.0;
  for (int j = 0; j < n_; ++j) {
    int i_lo = std::max(0, j - ku_),
        i_hi = std::min(n_ - 1, j + std::max(kl_, ku_));
    for (int i = i_lo; i <= i_hi; ++i)
      d = std::max(d, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
  }
  return d;
}

double BandedMatrix::frobenius() const {
  double s = 0.0;
  for (int j = 0; j < n_; ++j) {
    int i_lo = std::max(0, j - ku_), i_hi = std::min(n_ - 1, j + kl_);
    for (int i = i_lo; i <= i_hi; ++i) s += std::norm((*this)(i, j));
  }
  return std::sqrt(s);
}

BandedMatrix band_truncate(const BandedMatrix& A, double tol) {
  double amax = 0.0;
  for (int j = 0; j < A.n(); ++j)
    for (int i = std::max(0, j - A.ku());
         i <= std::min(A.n() - 1, j + A.kl()); ++i)
      amax = std::max(amax, std::abs(A(i, j)));
  double thresh = tol * amax;
  int kl = 0, ku = 0;
  for (int j = 0; j < A.n(); ++j)
    for (int i = std::max(0, j - A.ku());
         i <= std::min(A.n() - 1, j + A.kl()); ++i)
      if (std::abs(A(i, j)) > thresh) {
        kl = std::max(kl, i - j);
        ku = std::max(ku, j - i);
      }
  BandedMatrix B(A.n(), kl, ku);
  for (int j = 0; j < A.n(); ++j)
    for (int i = std::max(0, j - ku); i <= std::min(A.n() - 1, j + kl); ++i)
      B.set(i, j, A(i, j));
  return B;
}

BandedLU::BandedLU(const BandedMatrix& A)
    : n_(A.n()), kl_(A.kl()), ku_(A.ku()), ldab_(2 * A.kl() + A.ku() + 1) {
  lu_.assign(static_cast<size_t>(n_) * ldab_, {0.0, 0.0});
  ipiv_.assign(n_, 0);
  for (int j = 0; j < n_; ++j)
    for (int i = std::max(0, j - ku_); i <= std::min(n_ - 1, j + kl_); ++i)
      lu_[static_cast<size_t>(j) * ldab_ + (kl_ + ku_ + i - j)] = A(i, j);
  lapack_int info = LAPACKE_zgbtrf(LAPACK_COL_MAJOR, n_, n_, kl_, ku_,
                                   lu_.data(), ldab_, ipiv_.data());
  if (info != 0)
    throw std::runtime_error("singular-to-tolerance: banded LU failed at pivot " +
                             std::to_string(info));
}

void BandedLU::solve(cvec& x) const {
  lapack_int info = LAPACKE_zgbtrs(LAPACK_COL_MAJOR, 'N', n_, kl_, ku_, 1,
                                   lu_.data(), ldab_, ipiv_.data(), x.data(),
                                   n_);
  if (info != 0) throw std::runtime_error("banded solve failed");
}

void BandedLU::solve_adj(cvec& x) const {
  lapack_int info = LAPACKE_zgbtrs(LAPACK_COL_MAJOR, 'C', n_, kl_, ku_, 1,
                                   lu_.data(), ldab_, ipiv_.data(), x.data(),
                                   n_);
  if (info != 0) throw std::runtime_error("banded adjoint solve failed");
}

double BandedLU::solve_refined(const BandedMatrix& A, const cvec& b, cvec& x,
                               double tol, int max_refine) const {
  double bn = norm2(b);
  if (bn == 0.0) {
    x.assign(n_, {0.0, 0.0});
    return 0.0;
  }
  x = b;
  solve(x);
  cvec r(n_), dx;
  double rel = 0.0;
  for (int it = 0; it <= max_refine; ++it) {
    A.matvec(x, r);
    for (int i = 0; i < n_; ++i) r[i] = b[i] - r[i];
    rel = norm2(r) / bn;
    if (rel <= tol) break;
    dx = r;
    solve(dx);
    for (int i = 0; i < n_; ++i) x[i] += dx[i];
  }
  return rel;
}

LinOp LinOp::identity(int n) {
  auto f = [](const cvec& x, cvec& y) { y = x; };
  return {n, f, f};
}

LinOp LinOp::from_banded(const BandedMatrix* A) {
  return {A->n(),
          [A](const cvec& x, cvec& y) { A->matvec(x, y); },
          [A](const cvec& x, cvec& y) { A->matvec_adj(x, y); }};
}

LinOp LinOp::diagonal(const std::vector<double>& d) {
  int n = static_cast<int>(d.size());
  auto f = [d](const cvec& x, cvec& y) {
    y.resize(d.size());
    for (size_t i = 0; i < d.size(); ++i) y[i] = d[i] * x[i];
  };
  return {n, f, f};
}

LinOp LinOp::compose(LinOp A, LinOp B) {
  int n = B.n;
  auto fwd = [A, B](const cvec& x, cvec& y) {
    cvec t;
    B.apply(x, t);
    A.apply(t, y);
  };
  auto adj = [A, B](const cvec& x, cvec& y) {
    cvec t;
    A.apply_adj(x, t);
    B.apply_adj(t, y);
  };
  return {n, fwd, adj};
}

LinOp LinOp::inverse(const BandedLU* lu) {
  return {lu->n(),
          [lu](const cvec& x, cvec& y) {
            y = x;
            lu->solve(y);
          },
          [lu](const cvec& x, cvec& y) {
            y = x;
            lu->solve_adj(y);
          }};
}

PowerIterResult operator_norm(const LinOp& M, double tol, int max_iter,
                              unsigned long seed) {
  PowerIterResult res;
  int n = M.n;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  cvec v(n);
  for (auto& z : v) z = {unif(rng), unif(rng)};
  double vn = norm2(v);
  for (auto& z : v) z /= vn;

  cvec w, u;
  double sigma_prev = -1.0;
  int settled = 0;
  for (int it = 1; it <= max_iter; ++it) {
    M.apply(v, w);
    double sigma = norm2(w);
    res.iterations = it;
    if (sigma == 0.0) {
      res.norm = 0.0;
      res.converged = true;
      return res;
    }
    M.apply_adj(w, u);
    double un = norm2(u);
    for (int i = 0; i < n; ++i) v[i] = u[i] / un;
    double rel = sigma_prev > 0
                     ? std::abs(sigma - sigma_prev) / sigma
                     : 1.0;
    res.last_rel_change = rel;
    res.norm = sigma;
    if (rel <= tol / 10.0) {
      if (++settled >= 2) {
        res.converged = true;
        return res;
      }
    } else {
      settled = 0;
    }
    sigma_prev = sigma;
  }
  return res;
}

}  // namespace reslab
