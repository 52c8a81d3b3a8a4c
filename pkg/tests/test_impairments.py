import math

import numpy as np
import pytest

from fdsic.impairments import (
    HammersteinModel,
    SiChannel,
    add_awgn,
    apply_analog_sic,
    apply_channel,
    apply_hammerstein,
    capture_aux,
    coherence_time,
    dbm_to_power,
    default_pa,
    exponential_profile,
    fading_corr_from_coherence,
    power_to_dbm,
)
from fdsic.signal import Waveform
from conftest import cgauss
from oracles.distortion import nl_power_db


def test_coherence_time_values():
    # T_c = c / (v f_c), evaluated by hand
    assert coherence_time(60 / 3.6, 2.52e9) * 1e3 == pytest.approx(3e8 / (60 / 3.6 * 2.52e9) * 1e3)
    assert abs(coherence_time(60 / 3.6, 2.52e9) * 1e3 - 7.14) < 0.01
    assert abs(coherence_time(3 / 3.6, 2.52e9) * 1e3 - 142.86) < 0.01
    assert coherence_time(0, 2.52e9) == math.inf
    with pytest.raises(ValueError):
        coherence_time(-1, 1e9)


def test_fading_corr():
    assert fading_corr_from_coherence(1.0, 1.0) == pytest.approx(math.exp(-1))
    with pytest.raises(ValueError):
        fading_corr_from_coherence(0, 1)


def test_default_pa_shape_and_imd_level():
    pa = default_pa()
    assert (pa.k_terms, pa.l_taps) == (2, 2) and pa.order == 3
    rng = np.random.default_rng(0)
    x = cgauss(rng, 20000)
    y = apply_hammerstein(pa, Waveform(x, 1.0)).samples
    assert -33 < nl_power_db(x, y) < -27


def test_default_pa_am_am_monotonic():
    c = default_pa().coeffs.sum(axis=1)
    r = np.linspace(0, 6, 2000)
    am = np.abs(sum(ck * r ** (2 * k + 1) for k, ck in enumerate(c)))
    assert np.all(np.diff(am) > 0)


def test_hammerstein_model_validation():
    with pytest.raises(ValueError):
        HammersteinModel([[np.inf]])
    m = HammersteinModel.identity(2, 3)
    assert m.linear_gain == 1 and m.n_coeffs == 6


def test_exponential_profile():
    p = exponential_profile(4, 3.0)
    assert p.sum() == pytest.approx(1)
    assert 10 * np.log10(p[0] / p[1]) == pytest.approx(3.0)


def test_channel_static_equals_convolution_across_calls(rng):
    ch = SiChannel.exponential(5, 3.0, power_gain_db=-10, symbol_len=16, seed=3)
    x = cgauss(rng, 160)
    y1 = apply_channel(ch, Waveform(x[:80], 1.0)).samples
    y2 = apply_channel(ch, Waveform(x[80:], 1.0)).samples
    want = np.convolve(x, ch.tap_gains)[:160] * 10 ** (-10 / 20)
    np.testing.assert_allclose(np.concatenate([y1, y2]), want, atol=1e-12)


def test_channel_fades_once_per_block():
    ch = SiChannel.exponential(3, 3.0, coherence_time_s=1.0, step_s=0.1, symbol_len=10, seed=1)
    _, snaps = apply_channel(ch, Waveform(np.ones(35), 1.0), return_taps=True)
    assert snaps.shape == (4, 3)
    assert not np.allclose(snaps[0], snaps[1])


def test_fading_stationarity():
    ch = SiChannel.exponential(4, 3.0, coherence_time_s=1e-3, step_s=1e-4, seed=9)
    acc = np.zeros(4)
    n = 20000
    for _ in range(n):
        ch.advance()
        acc += np.abs(ch.tap_gains) ** 2
    err_db = 10 * np.log10(acc / n / ch.profile)
    assert np.all(np.abs(err_db) < 0.5)


def test_analog_sic():
    base = SiChannel.exponential(8, 3.0, seed=2)
    same = apply_analog_sic(base, 50)
    assert same.power_gain_db == -50
    np.testing.assert_array_equal(same.tap_gains, base.tap_gains)
    wide = apply_analog_sic(base, 50, delay_spread_mult=4)
    assert wide.l_taps == 32 and wide.power_gain_db == -50
    with pytest.raises(ValueError):
        apply_analog_sic(base, -1)


def test_awgn_power_and_determinism():
    x = Waveform(np.zeros(200000), 1.0)
    a = add_awgn(x, -10, [1, 2])
    assert power_to_dbm(a.power()) == pytest.approx(-10, abs=0.05)
    np.testing.assert_array_equal(a.samples, add_awgn(x, -10, [1, 2]).samples)
    np.testing.assert_array_equal(add_awgn(x, -math.inf, 0).samples, x.samples)


def test_aux_capture_noise_level():
    y = Waveform(np.ones(100000), 1.0)
    cap = capture_aux(y, -30, 0)
    assert power_to_dbm(np.mean(np.abs(cap.samples - 1) ** 2)) == pytest.approx(-30, abs=0.1)


def test_dbm_helpers():
    assert dbm_to_power(0) == 1 and dbm_to_power(-math.inf) == 0
    assert power_to_dbm(1e-9) == pytest.approx(-90)
