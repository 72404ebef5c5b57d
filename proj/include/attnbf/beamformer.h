// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>
#include <vector>

#include "attnbf/covariance.h"
#include "attnbf/grid_io.h"
#include "attnbf/stft.h"

namespace attnbf {

// Picks the reference microphone; index 0 is the first channel.
struct ReferenceSelector {
  int index = 0;
  std::vector<cplx> one_hot(int mics) const;
};

// Per-(bin, frame) complex filter weights, stored [bin][frame][mic].
class FilterField {
 public:
  FilterField() = default;
  FilterField(int bins, int frames, int mics)
      : bins_(bins), frames_(frames), mics_(mics), data_(static_cast<std::size_t>(bins) * frames * mics) {}

  int bins() const { return bins_; }
  int frames() const { return frames_; }
  int mics() const { return mics_; }
  cplx& operator()(int f, int t, int m) { return data_[(std::size_t(f) * frames_ + t) * mics_ + m]; }
  const cplx& operator()(int f, int t, int m) const { return data_[(std::size_t(f) * frames_ + t) * mics_ + m]; }
  std::span<cplx> slice(int f, int t) { return {data_.data() + (std::size_t(f) * frames_ + t) * mics_, std::size_t(mics_)}; }
  std::span<const cplx> slice(int f, int t) const {
    return {data_.data() + (std::size_t(f) * frames_ + t) * mics_, std::size_t(mics_)};
  }

  // rows = bins, cols = frames * mics * 2 (re, im interleaved)
  Grid to_grid() const;

 private:
  int bins_ = 0;
  int frames_ = 0;
  int mics_ = 0;
  std::vector<cplx> data_;
};

struct MvdrOptions {
  // Diagonal loading: Phi_nn + loading * (|tr Phi_nn| / M + loading_floor) I.
  double loading = 1e-6;
  double loading_floor = 1e-10;
  // |tr(Phi_nn^-1 Phi_xx)| below this yields the pass-through filter u_ref.
  double degenerate_trace = 1e-12;
};

// Single-bin MVDR: [Phi_nn^-1 Phi_xx / tr(Phi_nn^-1 Phi_xx)] u_ref. Uses a
// Cholesky solve on the loaded noise SCM, falling back to pivoted LU when it
// is not positive definite.
std::vector<cplx> mvdr_weights(const CMat& phi_xx, const CMat& phi_nn, int ref, const MvdrOptions& opts = {});

FilterField mvdr(const ScmSequence& phi_xx, const ScmSequence& phi_nn, ReferenceSelector ref = {},
                 const MvdrOptions& opts = {});

// h = A_xx A_nn u_ref, no inversion or normalization.
FilterField ic_mvdr(const ScmSequence& a_xx, const ScmSequence& a_nn, ReferenceSelector ref = {});

// Z(f, t) = h^H(f, t) y(f, t); returns a single-channel spectrogram.
Spectrogram apply_filter(const Spectrogram& mixture, const FilterField& h);

}  // namespace attnbf
