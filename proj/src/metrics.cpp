// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/metrics.h"

#include <cmath>
#include <vector>

#include "attnbf/error.h"

namespace attnbf {
namespace {

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

void check(std::span<const double> s, std::span<const double> s_hat) {
  if (s.size() != s_hat.size()) throw InvalidInput("metric: signal lengths differ");
  if (energy(s) == 0.0) throw InvalidInput("metric: reference signal is silent");
}

double ratio_db(double signal, double error) {
  return 10.0 * std::log10(signal / std::max(error, kLossFloor * signal));
}

}  // namespace

double snr_loss(std::span<const double> s, std::span<const double> s_hat) { return -sdr(s, s_hat); }

double sdr(std::span<const double> s, std::span<const double> s_hat) {
  check(s, s_hat);
  double err = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) err += (s[i] - s_hat[i]) * (s[i] - s_hat[i]);
  return ratio_db(energy(s), err);
}

double si_sdr(std::span<const double> s, std::span<const double> s_hat) {
  check(s, s_hat);
  double dot = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) dot += s[i] * s_hat[i];
  const double alpha = dot / energy(s);
  double target = 0.0, err = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = alpha * s[i];
    target += t * t;
    err += (t - s_hat[i]) * (t - s_hat[i]);
  }
  if (target == 0.0) return -10.0 * std::log10(1.0 / kLossFloor);
  return ratio_db(target, err);
}

}  // namespace attnbf
