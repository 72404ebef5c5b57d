# Copyright 2026 The attnbf Authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

import numpy as np
import pytest

import attnbf


def test_stft_round_trip_on_interior():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 4000))
    spec = attnbf.stft(x, window_len=256, hop=64)
    assert spec.shape == (3, 129, 63)
    y = attnbf.istft(spec, 4000, window_len=256, hop=64)
    b, e = attnbf.interior_range(4000, window_len=256, hop=64)
    assert np.max(np.abs(y[:, b:e] - x[:, b:e])) < 1e-9


def test_stft_matches_numpy_for_one_frame():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(512)
    spec = attnbf.stft(x, window_len=256, hop=64)
    # Frame t covers padded samples [t*hop, t*hop+N) with N-hop leading zeros.
    t = 5
    start = t * 64 - (256 - 64)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(256) / 256)
    expected = np.fft.rfft(x[start:start + 256] * window)
    assert np.allclose(spec[0, :, t], expected, atol=1e-9)


def test_mvdr_is_distortionless():
    rng = np.random.default_rng(2)
    d = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    phi_nn = a @ a.conj().T + 4 * np.eye(4)
    h = np.asarray(attnbf.mvdr_weights(np.outer(d, d.conj()), phi_nn, ref=1, loading=0.0))
    assert abs(np.vdot(h, d) - d[1]) < 1e-8


def test_metrics():
    rng = np.random.default_rng(3)
    s = rng.standard_normal(1000)
    n = rng.standard_normal(1000)
    n -= s * (n @ s) / (s @ s)
    n *= np.linalg.norm(s) / np.linalg.norm(n)
    assert attnbf.sdr(s, s + n) == pytest.approx(0.0, abs=1e-9)
    assert attnbf.si_sdr(s, 2 * s + n) == pytest.approx(10 * np.log10(4.0), abs=1e-9)
    assert attnbf.snr_loss(s, s + n) == pytest.approx(0.0, abs=1e-9)


def test_simulate_and_enhance(small_config):
    utt = attnbf.simulate(3, dynamic=True, config=str(small_config))
    assert utt["mixture"].shape[0] == 5
    assert utt["mixture"].shape == utt["speech"].shape
    assert 0.0 <= utt["snr_db"] <= 10.0
    mask = attnbf.oracle_mask(utt["speech"][0], utt["mixture"][0], window_len=256, hop=64)
    assert mask.min() >= 0.0 and mask.max() <= 1.0
    out = attnbf.enhance(utt["mixture"], "rec", mask=mask, config=str(small_config))
    assert out["signal"].shape == (utt["mixture"].shape[1],)
    b, e = out["interior"]
    assert attnbf.sdr(utt["speech"][0][b:e], out["signal"][b:e]) > attnbf.sdr(
        utt["speech"][0][b:e], utt["mixture"][0][b:e])


def test_errors_map_to_python_exceptions(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[stft]\nno_such_key = 1\n")
    with pytest.raises(attnbf.ConfigError):
        attnbf.effective_config(str(bad))
    with pytest.raises(attnbf.ConfigError):
        attnbf.enhance(np.zeros((5, 1000)), "la")
    with pytest.raises(attnbf.InvalidInput):
        attnbf.enhance(np.zeros((5, 1000)), "cum")
    assert issubclass(attnbf.ConfigError, RuntimeError)


def test_effective_config_echoes_overrides(small_config):
    text = attnbf.effective_config(str(small_config))
    assert "[stft]\nwindow_len = 256\nhop = 64\n" in text
    assert "rt60_min = 0.3" in text
