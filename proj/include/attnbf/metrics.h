// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>

namespace attnbf {

// Floor on the error-to-signal energy ratio; bounds every score at +-120 dB.
inline constexpr double kLossFloor = 1e-12;

// Negative utterance-level SNR in dB:
//   -10 log10(||s||^2 / max(||s - s_hat||^2, kLossFloor ||s||^2)).
// Throws InvalidInput for mismatched lengths or a silent reference.
double snr_loss(std::span<const double> s, std::span<const double> s_hat);

// Energy-ratio SDR, identical to -snr_loss.
double sdr(std::span<const double> s, std::span<const double> s_hat);

// Scale-invariant SDR: s_hat is projected onto s before the ratio.
double si_sdr(std::span<const double> s, std::span<const double> s_hat);

}  // namespace attnbf
