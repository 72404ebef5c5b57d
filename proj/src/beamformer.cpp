// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/beamformer.h"

#include <cmath>

#include "attnbf/error.h"
#include "attnbf/linalg.h"

namespace attnbf {

std::vector<cplx> ReferenceSelector::one_hot(int mics) const {
  if (index < 0 || index >= mics) throw InvalidInput("reference channel out of range");
  std::vector<cplx> u(static_cast<std::size_t>(mics));
  u[index] = 1.0;
  return u;
}

Grid FilterField::to_grid() const {
  Grid grid;
  grid.rows = static_cast<std::uint32_t>(bins_);
  grid.cols = static_cast<std::uint32_t>(std::size_t(frames_) * mics_ * 2);
  grid.values.reserve(data_.size() * 2);
  for (const auto& v : data_) {
    grid.values.push_back(static_cast<float>(v.real()));
    grid.values.push_back(static_cast<float>(v.imag()));
  }
  return grid;
}

std::vector<cplx> mvdr_weights(const CMat& phi_xx, const CMat& phi_nn, int ref, const MvdrOptions& opts) {
  const int m = phi_nn.rows();
  if (phi_nn.cols() != m || phi_xx.rows() != m || phi_xx.cols() != m)
    throw InvalidInput("mvdr: SCM shapes differ");
  if (ref < 0 || ref >= m) throw InvalidInput("mvdr: reference channel out of range");
  if (hermitian_deviation(phi_nn) > 1e-8 * std::max(1.0, phi_nn.max_abs()))
    throw InvalidInput("mvdr: noise SCM is not Hermitian");

  CMat loaded = phi_nn;
  const double load = opts.loading * (std::abs(phi_nn.trace().real()) / m + opts.loading_floor);
  for (int i = 0; i < m; ++i) loaded(i, i) += load;

  std::optional<CMat> x;
  if (auto chol = cholesky(loaded)) {
    x = cholesky_solve(*chol, phi_xx);
  } else {
    x = lu_solve(loaded, phi_xx);
  }
  std::vector<cplx> h(static_cast<std::size_t>(m));
  if (!x) {
    h[ref] = 1.0;
    return h;
  }
  const cplx tr = x->trace();
  if (std::abs(tr) < opts.degenerate_trace || !std::isfinite(std::abs(tr))) {
    h[ref] = 1.0;
    return h;
  }
  for (int i = 0; i < m; ++i) h[i] = (*x)(i, ref) / tr;
  return h;
}

FilterField mvdr(const ScmSequence& phi_xx, const ScmSequence& phi_nn, ReferenceSelector ref, const MvdrOptions& opts) {
  if (!phi_xx.same_shape(phi_nn)) throw InvalidInput("mvdr: SCM sequences differ in shape");
  FilterField out(phi_xx.bins(), phi_xx.frames(), phi_xx.mics());
  for (int f = 0; f < phi_xx.bins(); ++f)
    for (int t = 0; t < phi_xx.frames(); ++t) {
      auto h = mvdr_weights(phi_xx.at(f, t), phi_nn.at(f, t), ref.index, opts);
      std::copy(h.begin(), h.end(), out.slice(f, t).begin());
    }
  return out;
}

FilterField ic_mvdr(const ScmSequence& a_xx, const ScmSequence& a_nn, ReferenceSelector ref) {
  if (!a_xx.same_shape(a_nn)) throw InvalidInput("ic_mvdr: matrix sequences differ in shape");
  const int m = a_xx.mics();
  if (ref.index < 0 || ref.index >= m) throw InvalidInput("ic_mvdr: reference channel out of range");
  FilterField out(a_xx.bins(), a_xx.frames(), m);
  std::vector<cplx> col(static_cast<std::size_t>(m));
  for (int f = 0; f < a_xx.bins(); ++f)
    for (int t = 0; t < a_xx.frames(); ++t) {
      for (int i = 0; i < m; ++i) col[i] = a_nn(f, t, i, ref.index);
      auto h = out.slice(f, t);
      for (int i = 0; i < m; ++i) {
        cplx acc = 0.0;
        for (int k = 0; k < m; ++k) acc += a_xx(f, t, i, k) * col[k];
        h[i] = acc;
      }
    }
  return out;
}

Spectrogram apply_filter(const Spectrogram& mixture, const FilterField& h) {
  if (h.bins() != mixture.bins() || h.frames() != mixture.frames() || h.mics() != mixture.channels())
    throw InvalidInput("apply_filter: filter shape does not match mixture");
  Spectrogram out(1, mixture.frames(), mixture.config(), mixture.num_samples());
  for (int f = 0; f < mixture.bins(); ++f)
    for (int t = 0; t < mixture.frames(); ++t) {
      cplx acc = 0.0;
      for (int m = 0; m < mixture.channels(); ++m) acc += std::conj(h(f, t, m)) * mixture(m, f, t);
      out(0, f, t) = acc;
    }
  return out;
}

}  // namespace attnbf
