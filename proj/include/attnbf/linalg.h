// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace attnbf {

using cplx = std::complex<double>;

// Small dense row-major complex matrix.
class CMat {
 public:
  CMat() = default;
  CMat(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols) {}
  static CMat identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  cplx& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  const cplx& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  cplx trace() const;
  CMat adjoint() const;
  CMat operator*(const CMat& rhs) const;
  CMat operator+(const CMat& rhs) const;
  CMat operator-(const CMat& rhs) const;
  CMat operator*(cplx s) const;
  double max_abs() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<cplx> data_;
};

// Largest |A(i,j) - conj(A(j,i))| over all entries (diagonal included).
double hermitian_deviation(const CMat& a);

// Cholesky factor L (lower, real positive diagonal) of a Hermitian positive
// definite matrix; nullopt when a pivot is not strictly positive.
std::optional<CMat> cholesky(const CMat& a);

// Solves L L^H X = B given the Cholesky factor L.
CMat cholesky_solve(const CMat& chol, const CMat& b);

// Solves A X = B by LU with partial pivoting; nullopt if A is singular.
std::optional<CMat> lu_solve(const CMat& a, const CMat& b);

}  // namespace attnbf
