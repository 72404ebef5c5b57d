// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/covariance.h"

#include <algorithm>
#include <cmath>

#include "attnbf/error.h"

namespace attnbf {

ScmSequence::ScmSequence(int bins, int frames, int mics, ScmKind kind)
    : bins_(bins),
      frames_(frames),
      mics_(mics),
      kind_(kind),
      data_(static_cast<std::size_t>(bins) * frames * mics * mics) {}

CMat ScmSequence::at(int f, int t) const {
  CMat out(mics_, mics_);
  auto s = slice(f, t);
  std::copy(s.begin(), s.end(), out.data().begin());
  return out;
}

void ScmSequence::set(int f, int t, const CMat& m) {
  if (m.rows() != mics_ || m.cols() != mics_) throw InvalidInput("ScmSequence::set: wrong matrix size");
  std::copy(m.data().begin(), m.data().end(), slice(f, t).begin());
}

Grid ScmSequence::to_grid() const {
  Grid grid;
  grid.rows = static_cast<std::uint32_t>(bins_);
  grid.cols = static_cast<std::uint32_t>(std::size_t(frames_) * mics_ * mics_ * 2);
  grid.values.reserve(data_.size() * 2);
  for (const auto& v : data_) {
    grid.values.push_back(static_cast<float>(v.real()));
    grid.values.push_back(static_cast<float>(v.imag()));
  }
  return grid;
}

CMat iscm(std::span<const cplx> v) {
  const int m = static_cast<int>(v.size());
  CMat out(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out(i, j) = v[i] * std::conj(v[j]);
  return out;
}

ScmSequence iscm_sequence(const Spectrogram& spec, ScmKind kind) {
  const int mics = spec.channels();
  ScmSequence out(spec.bins(), spec.frames(), mics, kind);
  std::vector<cplx> v(static_cast<std::size_t>(mics));
  for (int f = 0; f < spec.bins(); ++f)
    for (int t = 0; t < spec.frames(); ++t) {
      for (int m = 0; m < mics; ++m) v[m] = spec(m, f, t);
      auto dst = out.slice(f, t);
      for (int i = 0; i < mics; ++i)
        for (int j = 0; j < mics; ++j) dst[std::size_t(i) * mics + j] = v[i] * std::conj(v[j]);
    }
  return out;
}

ScmSequence cum_avg(const ScmSequence& iscms) {
  ScmSequence out(iscms.bins(), iscms.frames(), iscms.mics(), iscms.kind());
  const std::size_t mm = std::size_t(iscms.mics()) * iscms.mics();
  std::vector<cplx> acc(mm);
  for (int f = 0; f < iscms.bins(); ++f) {
    std::fill(acc.begin(), acc.end(), cplx{});
    for (int t = 0; t < iscms.frames(); ++t) {
      auto src = iscms.slice(f, t);
      auto dst = out.slice(f, t);
      const double inv = 1.0 / (t + 1);
      for (std::size_t k = 0; k < mm; ++k) {
        acc[k] += src[k];
        dst[k] = acc[k] * inv;
      }
    }
  }
  return out;
}

ScmSequence rec_avg(const ScmSequence& iscms, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("rec_avg: alpha must lie in (0, 1)");
  ScmSequence out(iscms.bins(), iscms.frames(), iscms.mics(), iscms.kind());
  const std::size_t mm = std::size_t(iscms.mics()) * iscms.mics();
  for (int f = 0; f < iscms.bins(); ++f)
    for (int t = 0; t < iscms.frames(); ++t) {
      auto src = iscms.slice(f, t);
      auto dst = out.slice(f, t);
      if (t == 0) {
        std::copy(src.begin(), src.end(), dst.begin());
        continue;
      }
      auto prev = out.slice(f, t - 1);
      for (std::size_t k = 0; k < mm; ++k) dst[k] = alpha * prev[k] + src[k];
    }
  return out;
}

ScmSequence block_avg(const ScmSequence& iscms, int window) {
  if (window < 1) throw ConfigError("block_avg: window must be >= 1");
  ScmSequence out(iscms.bins(), iscms.frames(), iscms.mics(), iscms.kind());
  const std::size_t mm = std::size_t(iscms.mics()) * iscms.mics();
  std::vector<cplx> acc(mm);
  for (int f = 0; f < iscms.bins(); ++f)
    for (int t = 0; t < iscms.frames(); ++t) {
      // direct window sum, no running add/subtract
      const int first = std::max(0, t - window + 1);
      std::fill(acc.begin(), acc.end(), cplx{});
      for (int tau = first; tau <= t; ++tau) {
        auto src = iscms.slice(f, tau);
        for (std::size_t k = 0; k < mm; ++k) acc[k] += src[k];
      }
      const double inv = 1.0 / (t - first + 1);
      auto dst = out.slice(f, t);
      for (std::size_t k = 0; k < mm; ++k) dst[k] = acc[k] * inv;
    }
  return out;
}

int compact_dim(int mics) { return mics * mics; }

std::vector<double> compact_hermitian(const CMat& mat) {
  if (mat.rows() != mat.cols()) throw InvalidInput("compact_hermitian: matrix not square");
  const double tol = 1e-8 * std::max(1.0, mat.max_abs());
  if (hermitian_deviation(mat) > tol) throw InvalidInput("compact_hermitian: matrix is not Hermitian");
  const int m = mat.rows();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(compact_dim(m)));
  for (int i = 0; i < m; ++i) out.push_back(mat(i, i).real());
  for (int i = 1; i < m; ++i)
    for (int j = 0; j < i; ++j) {
      out.push_back(mat(i, j).real());
      out.push_back(mat(i, j).imag());
    }
  return out;
}

CMat expand_hermitian(std::span<const double> vec, int mics) {
  if (mics < 1 || vec.size() != static_cast<std::size_t>(compact_dim(mics)))
    throw InvalidInput("expand_hermitian: length does not match M*M");
  CMat out(mics, mics);
  for (int i = 0; i < mics; ++i) out(i, i) = vec[i];
  std::size_t k = static_cast<std::size_t>(mics);
  for (int i = 1; i < mics; ++i)
    for (int j = 0; j < i; ++j) {
      const cplx v(vec[k], vec[k + 1]);
      k += 2;
      out(i, j) = v;
      out(j, i) = std::conj(v);
    }
  return out;
}

int vector_dim(int mics, Vectorization mode) {
  return mode == Vectorization::kCompact ? compact_dim(mics) : 2 * mics * mics;
}

namespace {

void append_bin(std::vector<double>& out, std::span<const cplx> mat, int mics, Vectorization mode) {
  const std::size_t mm = std::size_t(mics) * mics;
  if (mode == Vectorization::kFull) {
    for (std::size_t k = 0; k < mm; ++k) out.push_back(mat[k].real());
    for (std::size_t k = 0; k < mm; ++k) out.push_back(mat[k].imag());
    return;
  }
  CMat m(mics, mics);
  std::copy(mat.begin(), mat.end(), m.data().begin());
  auto packed = compact_hermitian(m);
  out.insert(out.end(), packed.begin(), packed.end());
}

}  // namespace

std::vector<double> vectorize_scm(const ScmSequence& scms, int t, Vectorization mode) {
  if (t < 0 || t >= scms.frames()) throw InvalidInput("vectorize_scm: frame out of range");
  std::vector<double> out;
  out.reserve(std::size_t(scms.bins()) * vector_dim(scms.mics(), mode));
  for (int f = 0; f < scms.bins(); ++f) append_bin(out, scms.slice(f, t), scms.mics(), mode);
  return out;
}

std::vector<double> vectorize_frames(const ScmSequence& scms, Vectorization mode) {
  std::vector<double> out;
  out.reserve(std::size_t(scms.frames()) * scms.bins() * vector_dim(scms.mics(), mode));
  for (int t = 0; t < scms.frames(); ++t)
    for (int f = 0; f < scms.bins(); ++f) append_bin(out, scms.slice(f, t), scms.mics(), mode);
  return out;
}

std::vector<CMat> devectorize_scm(std::span<const double> vec, int mics, int bins, Vectorization mode) {
  const std::size_t d = static_cast<std::size_t>(vector_dim(mics, mode));
  if (bins < 1 || vec.size() != d * bins) throw InvalidInput("devectorize_scm: length does not match F * D");
  std::vector<CMat> out;
  out.reserve(static_cast<std::size_t>(bins));
  for (int f = 0; f < bins; ++f) {
    auto chunk = vec.subspan(d * f, d);
    if (mode == Vectorization::kCompact) {
      out.push_back(expand_hermitian(chunk, mics));
      continue;
    }
    const std::size_t mm = std::size_t(mics) * mics;
    CMat m(mics, mics);
    for (std::size_t k = 0; k < mm; ++k) m.data()[k] = cplx(chunk[k], chunk[mm + k]);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace attnbf
