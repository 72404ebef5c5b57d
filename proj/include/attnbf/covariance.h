// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>
#include <vector>

#include "attnbf/grid_io.h"
#include "attnbf/linalg.h"
#include "attnbf/stft.h"

namespace attnbf {

enum class ScmKind { kSpeech, kNoise, kMixture };

// Per-(bin, frame) M x M complex matrices, stored [bin][frame][row][col].
class ScmSequence {
 public:
  ScmSequence() = default;
  ScmSequence(int bins, int frames, int mics, ScmKind kind = ScmKind::kMixture);

  int bins() const { return bins_; }
  int frames() const { return frames_; }
  int mics() const { return mics_; }
  ScmKind kind() const { return kind_; }

  cplx& operator()(int f, int t, int i, int j) { return data_[offset(f, t) + std::size_t(i) * mics_ + j]; }
  const cplx& operator()(int f, int t, int i, int j) const {
    return data_[offset(f, t) + std::size_t(i) * mics_ + j];
  }
  std::span<cplx> slice(int f, int t) { return {data_.data() + offset(f, t), std::size_t(mics_) * mics_}; }
  std::span<const cplx> slice(int f, int t) const {
    return {data_.data() + offset(f, t), std::size_t(mics_) * mics_};
  }
  CMat at(int f, int t) const;
  void set(int f, int t, const CMat& m);

  bool same_shape(const ScmSequence& o) const {
    return bins_ == o.bins_ && frames_ == o.frames_ && mics_ == o.mics_;
  }

  // Debug dump: rows = bins, cols = frames * mics * mics * 2 (re, im interleaved).
  Grid to_grid() const;

 private:
  std::size_t offset(int f, int t) const {
    return (static_cast<std::size_t>(f) * frames_ + t) * mics_ * mics_;
  }

  int bins_ = 0;
  int frames_ = 0;
  int mics_ = 0;
  ScmKind kind_ = ScmKind::kMixture;
  std::vector<cplx> data_;
};

// v v^H
CMat iscm(std::span<const cplx> v);

// Instantaneous SCMs of every time-frequency bin of a multichannel spectrogram.
ScmSequence iscm_sequence(const Spectrogram& spec, ScmKind kind);

// (1/t) sum_{tau<=t} Psi(tau)
ScmSequence cum_avg(const ScmSequence& iscms);

// Phi(t) = alpha Phi(t-1) + Psi(t), Phi(0) = 0. Unnormalized. alpha in (0, 1).
ScmSequence rec_avg(const ScmSequence& iscms, double alpha = 0.95);

// Mean over the latest `window` frames; early frames average over the frames
// available so far.
ScmSequence block_avg(const ScmSequence& iscms, int window = 25);

// Hermitian compaction. Layout: M real diagonal entries, then (re, im) of each
// strictly-lower entry in row-major order. Length M*M.
int compact_dim(int mics);
std::vector<double> compact_hermitian(const CMat& mat);
CMat expand_hermitian(std::span<const double> vec, int mics);

enum class Vectorization {
  kCompact,  // compact_hermitian per bin, M*M values
  kFull,     // per bin: row-major real parts then row-major imaginary parts, 2*M*M values
};

int vector_dim(int mics, Vectorization mode);

// Concatenation over bins f = 0..F-1 of the per-bin representation of frame t.
std::vector<double> vectorize_scm(const ScmSequence& scms, int t, Vectorization mode = Vectorization::kCompact);
// All frames, row-major [T][F * vector_dim].
std::vector<double> vectorize_frames(const ScmSequence& scms, Vectorization mode = Vectorization::kCompact);

// Inverse of vectorize_scm: one matrix per bin. Full mode returns matrices
// as-is (Hermitian symmetry is not enforced).
std::vector<CMat> devectorize_scm(std::span<const double> vec, int mics, int bins,
                                  Vectorization mode = Vectorization::kCompact);

}  // namespace attnbf
