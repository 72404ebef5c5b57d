// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Python bindings. Signals are float64 arrays shaped (channels, samples),
// spectrograms complex128 arrays shaped (channels, bins, frames) and masks
// float64 arrays shaped (bins, frames).

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "attnbf/beamformer.h"
#include "attnbf/dataset.h"
#include "attnbf/error.h"
#include "attnbf/masking.h"
#include "attnbf/metrics.h"
#include "attnbf/parallel.h"
#include "attnbf/pipeline.h"
#include "attnbf/run_config.h"
#include "attnbf/simulator.h"
#include "attnbf/stft.h"

namespace py = pybind11;
using namespace attnbf;

namespace {

using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

MultiSignal to_signal(const RealArray& a) {
  if (a.ndim() == 1) return {Signal(a.data(), a.data() + a.shape(0))};
  if (a.ndim() != 2) throw InvalidInput("signal must be 1-D or (channels, samples)");
  MultiSignal out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t m = 0; m < a.shape(0); ++m) out[m].assign(a.data(m, 0), a.data(m, 0) + a.shape(1));
  return out;
}

RealArray from_signal(const MultiSignal& x) {
  const py::ssize_t c = static_cast<py::ssize_t>(x.size());
  const py::ssize_t n = c ? static_cast<py::ssize_t>(x[0].size()) : 0;
  RealArray out({c, n});
  for (py::ssize_t m = 0; m < c; ++m) std::copy(x[m].begin(), x[m].end(), out.mutable_data(m, 0));
  return out;
}

RealArray from_mono(const Signal& x) {
  RealArray out(static_cast<py::ssize_t>(x.size()));
  std::copy(x.begin(), x.end(), out.mutable_data());
  return out;
}

StftConfig stft_config(int window_len, int hop, int sample_rate) {
  StftConfig cfg;
  cfg.window_len = window_len;
  cfg.hop = hop;
  cfg.sample_rate = sample_rate;
  cfg.validate();
  return cfg;
}

ComplexArray from_spec(const Spectrogram& s) {
  ComplexArray out({s.channels(), s.bins(), s.frames()});
  std::copy(s.data().begin(), s.data().end(), out.mutable_data());
  return out;
}

Spectrogram to_spec(const ComplexArray& a, const StftConfig& cfg, std::size_t num_samples) {
  if (a.ndim() != 3) throw InvalidInput("spectrogram must be (channels, bins, frames)");
  if (a.shape(1) != cfg.num_bins()) throw InvalidInput("spectrogram bin count does not match window_len");
  Spectrogram s(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(2)), cfg, num_samples);
  std::copy(a.data(), a.data() + a.size(), s.data().begin());
  return s;
}

Mask to_mask(const RealArray& a) {
  if (a.ndim() != 2) throw InvalidInput("mask must be (bins, frames)");
  Mask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  for (py::ssize_t f = 0; f < a.shape(0); ++f)
    for (py::ssize_t t = 0; t < a.shape(1); ++t) m(f, t) = *a.data(f, t);
  m.validate();
  return m;
}

RealArray from_mask(const Mask& m) {
  RealArray out({m.bins(), m.frames()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

CMat to_cmat(const ComplexArray& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw InvalidInput("matrix must be square");
  const int n = static_cast<int>(a.shape(0));
  CMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = *a.data(i, j);
  return m;
}

std::span<const double> span_of(const RealArray& a) {
  if (a.ndim() != 1) throw InvalidInput("expected a 1-D signal");
  return {a.data(), static_cast<std::size_t>(a.shape(0))};
}

py::dict enhance(const RealArray& mixture, const std::string& method_name_arg, const std::optional<RealArray>& mask,
                 const std::string& checkpoint, const std::string& config) {
  RunConfig cfg = RunConfig::load(config);
  const Method method = parse_method(method_name_arg);
  std::unique_ptr<SpatialFilterModel> model;
  if (is_learned(method)) {
    if (checkpoint.empty()) throw ConfigError("method " + method_name(method) + " requires a checkpoint");
    model = SpatialFilterModel::load(checkpoint);
    if (model->config().variant != method) throw ConfigError("checkpoint variant does not match the method");
  }
  const StftConfig stft = model ? model->config().stft : cfg.model.stft;
  const MultiSignal x = to_signal(mixture);
  Spectrogram spec;
  Signal out;
  {
    py::gil_scoped_release release;
    spec = analyze(x, stft);
  }
  const Mask m = mask ? to_mask(*mask) : Mask(spec.bins(), spec.frames(), 1.0);
  if (uses_mask(method) && !mask) throw InvalidInput("method " + method_name(method) + " needs a mask");
  {
    py::gil_scoped_release release;
    const Spectrogram y = model ? model->enhance(spec, m) : enhance_baseline(method, spec, m, cfg.baseline);
    out = synthesize(y)[0];
  }
  py::dict d;
  d["signal"] = from_mono(out);
  const auto [b, e] = interior_range(x[0].size(), stft);
  d["interior"] = py::make_tuple(b, e);
  return d;
}

py::dict simulate(std::uint64_t seed, bool dynamic, const std::string& config) {
  const RunConfig cfg = RunConfig::load(config);
  SimulatedUtterance u;
  {
    py::gil_scoped_release release;
    u = simulate_utterance(seed, dynamic, cfg.simulator);
  }
  py::dict d;
  d["mixture"] = from_signal(u.mixture);
  d["speech"] = from_signal(u.speech);
  d["noise"] = from_signal(u.noise);
  d["dry"] = from_mono(u.dry);
  d["sample_rate"] = cfg.simulator.sample_rate;
  d["scenario"] = py::module_::import("json").attr("loads")(scenario_to_json(u.scenario).dump());
  d["snr_db"] = u.scenario.snr_db;
  d["rt60"] = u.scenario.room.rt60;
  d["duration_s"] = u.scenario.duration_s;
  return d;
}

}  // namespace

PYBIND11_MODULE(_attnbf, m) {
  m.doc() = "Causal multichannel speech enhancement with attention-driven spatial filters";

  auto base = py::register_exception<Error>(m, "AttnbfError", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def(
      "stft",
      [](const RealArray& x, int window_len, int hop) {
        return from_spec(analyze(to_signal(x), stft_config(window_len, hop, 16000)));
      },
      py::arg("signal"), py::arg("window_len") = 1024, py::arg("hop") = 256);
  m.def(
      "istft",
      [](const ComplexArray& spec, std::size_t num_samples, int window_len, int hop) {
        const auto cfg = stft_config(window_len, hop, 16000);
        if (spec.ndim() == 3 && spec.shape(2) != cfg.num_frames(num_samples))
          throw InvalidInput("frame count does not match num_samples");
        return from_signal(synthesize(to_spec(spec, cfg, num_samples)));
      },
      py::arg("spec"), py::arg("num_samples"), py::arg("window_len") = 1024, py::arg("hop") = 256);
  m.def(
      "interior_range",
      [](std::size_t n, int window_len, int hop) { return interior_range(n, stft_config(window_len, hop, 16000)); },
      py::arg("num_samples"), py::arg("window_len") = 1024, py::arg("hop") = 256);
  m.def(
      "oracle_mask",
      [](const RealArray& clean, const RealArray& mixture, int window_len, int hop) {
        const auto cfg = stft_config(window_len, hop, 16000);
        return from_mask(oracle_mask(analyze(to_signal(clean), cfg), analyze(to_signal(mixture), cfg)));
      },
      py::arg("clean"), py::arg("mixture"), py::arg("window_len") = 1024, py::arg("hop") = 256);
  m.def(
      "mvdr_weights",
      [](const ComplexArray& phi_xx, const ComplexArray& phi_nn, int ref, double loading) {
        MvdrOptions opts;
        opts.loading = loading;
        return mvdr_weights(to_cmat(phi_xx), to_cmat(phi_nn), ref, opts);
      },
      py::arg("phi_xx"), py::arg("phi_nn"), py::arg("ref") = 0, py::arg("loading") = 1e-6);
  m.def("sdr", [](const RealArray& s, const RealArray& s_hat) { return sdr(span_of(s), span_of(s_hat)); },
        py::arg("reference"), py::arg("estimate"));
  m.def("si_sdr", [](const RealArray& s, const RealArray& s_hat) { return si_sdr(span_of(s), span_of(s_hat)); },
        py::arg("reference"), py::arg("estimate"));
  m.def("snr_loss", [](const RealArray& s, const RealArray& s_hat) { return snr_loss(span_of(s), span_of(s_hat)); },
        py::arg("reference"), py::arg("estimate"));
  m.def("enhance", &enhance, py::arg("mixture"), py::arg("method"), py::arg("mask") = std::nullopt,
        py::arg("checkpoint") = "", py::arg("config") = "",
        "Enhances a (channels, samples) mixture; returns {'signal', 'interior'}.");
  m.def("simulate", &simulate, py::arg("seed"), py::arg("dynamic") = true, py::arg("config") = "",
        "Renders one simulated utterance.");
  m.def(
      "effective_config", [](const std::string& path) { return RunConfig::load(path).dump(); }, py::arg("path") = "",
      "Effective configuration text after applying a config file.");
  m.def("num_workers", &num_workers);
}
