// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/linalg.h"

#include <cmath>
#include <utility>

#include "attnbf/error.h"

namespace attnbf {

CMat CMat::identity(int n) {
  CMat out(n, n);
  for (int i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

cplx CMat::trace() const {
  cplx acc = 0.0;
  for (int i = 0; i < std::min(rows_, cols_); ++i) acc += (*this)(i, i);
  return acc;
}

CMat CMat::adjoint() const {
  CMat out(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
  return out;
}

CMat CMat::operator*(const CMat& rhs) const {
  if (cols_ != rhs.rows_) throw InvalidInput("CMat product: inner dimensions differ");
  CMat out(rows_, rhs.cols_);
  for (int i = 0; i < rows_; ++i)
    for (int k = 0; k < cols_; ++k) {
      const cplx a = (*this)(i, k);
      for (int j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
    }
  return out;
}

CMat CMat::operator+(const CMat& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) throw InvalidInput("CMat sum: shapes differ");
  CMat out = *this;
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] += rhs.data_[i];
  return out;
}

CMat CMat::operator-(const CMat& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) throw InvalidInput("CMat difference: shapes differ");
  CMat out = *this;
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] -= rhs.data_[i];
  return out;
}

CMat CMat::operator*(cplx s) const {
  CMat out = *this;
  for (auto& v : out.data_) v *= s;
  return out;
}

double CMat::max_abs() const {
  double m = 0.0;
  for (const auto& v : data_) m = std::max(m, std::abs(v));
  return m;
}

double hermitian_deviation(const CMat& a) {
  if (a.rows() != a.cols()) return INFINITY;
  double dev = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j <= i; ++j) dev = std::max(dev, std::abs(a(i, j) - std::conj(a(j, i))));
  return dev;
}

std::optional<CMat> cholesky(const CMat& a) {
  const int n = a.rows();
  CMat l(n, n);
  for (int j = 0; j < n; ++j) {
    double diag = a(j, j).real();
    for (int k = 0; k < j; ++k) diag -= std::norm(l(j, k));
    if (!(diag > 0.0)) return std::nullopt;
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      cplx s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
      l(i, j) = s / ljj;
    }
  }
  return l;
}

CMat cholesky_solve(const CMat& chol, const CMat& b) {
  const int n = chol.rows();
  CMat x = b;
  for (int c = 0; c < b.cols(); ++c) {
    // forward: L y = b
    for (int i = 0; i < n; ++i) {
      cplx s = x(i, c);
      for (int k = 0; k < i; ++k) s -= chol(i, k) * x(k, c);
      x(i, c) = s / chol(i, i).real();
    }
    // backward: L^H x = y
    for (int i = n - 1; i >= 0; --i) {
      cplx s = x(i, c);
      for (int k = i + 1; k < n; ++k) s -= std::conj(chol(k, i)) * x(k, c);
      x(i, c) = s / chol(i, i).real();
    }
  }
  return x;
}

std::optional<CMat> lu_solve(const CMat& a, const CMat& b) {
  const int n = a.rows();
  CMat lu = a;
  CMat x = b;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
    if (std::abs(lu(piv, k)) == 0.0) return std::nullopt;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
      for (int j = 0; j < x.cols(); ++j) std::swap(x(k, j), x(piv, j));
    }
    for (int i = k + 1; i < n; ++i) {
      const cplx factor = lu(i, k) / lu(k, k);
      for (int j = k; j < n; ++j) lu(i, j) -= factor * lu(k, j);
      for (int j = 0; j < x.cols(); ++j) x(i, j) -= factor * x(k, j);
    }
  }
  for (int c = 0; c < x.cols(); ++c)
    for (int i = n - 1; i >= 0; --i) {
      cplx s = x(i, c);
      for (int j = i + 1; j < n; ++j) s -= lu(i, j) * x(j, c);
      x(i, c) = s / lu(i, i);
    }
  return x;
}

}  // namespace attnbf
