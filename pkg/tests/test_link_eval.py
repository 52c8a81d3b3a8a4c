import math
from dataclasses import replace

import numpy as np
import pytest

from fdsic.cancellers import CancellerKind
from fdsic.errors import ConfigError
from fdsic.link_eval import LinkConfig, run_link, standard_grid, sweep


def test_config_validation():
    with pytest.raises(ConfigError):
        LinkConfig(canceller="precal", n_frames=1)
    with pytest.raises(ConfigError):
        LinkConfig(analog_sic_db=-1)
    with pytest.raises(ConfigError):
        LinkConfig(canceller="bogus")
    with pytest.raises(ConfigError):
        LinkConfig(coherence_time_s=0)
    assert LinkConfig(canceller="aux_chain").canceller is CancellerKind.AUX_CHAIN


def test_run_link_deterministic():
    cfg = LinkConfig(canceller=CancellerKind.AUX_CHAIN, coherence_time_s=7.14e-3, n_frames=2, seed=3)
    assert run_link(cfg) == run_link(cfg)


@pytest.mark.parametrize("kind,n_rows", [
    (CancellerKind.LINEAR_FREQ, 20),
    (CancellerKind.PRECAL, 10),
])
def test_series_length(kind, n_rows):
    r = run_link(LinkConfig(canceller=kind, n_frames=2))
    assert r.cancellation_db.shape == (n_rows,)
    assert r.frame.min() == (1 if kind is CancellerKind.PRECAL else 0)
    assert r.sim_time_s == pytest.approx(20e-3)


def test_mean_excludes_first_frame():
    r = run_link(LinkConfig(canceller=CancellerKind.LINEAR_FREQ, n_frames=3, coherence_time_s=7.14e-3))
    assert r.mean_db == pytest.approx(np.mean(r.cancellation_db[r.frame > 0]))
    assert r.median_db == pytest.approx(np.median(r.cancellation_db[r.frame > 0]))


def test_total_composes_additively():
    r = run_link(LinkConfig(canceller=CancellerKind.LINEAR_FREQ, n_frames=1, analog_sic_db=40))
    assert r.total_mean_db == r.analog_sic_db + r.mean_db
    assert r.analog_sic_db == 40


def test_residual_evm_matches_mean_for_flat_series():
    r = run_link(LinkConfig(canceller=CancellerKind.LINEAR_FREQ, n_frames=2))
    # power-weighted ratio; equals 10^(-c/20) when every subframe has the same c
    assert r.residual_evm == pytest.approx(10 ** (-r.mean_db / 20), rel=0.3)


def test_aux_noise_ceiling_tracks_noise_floor():
    # noise-limited regime: both points sit well above the ~57 dB
    # frequency-interpolation floor of the static channel
    base = LinkConfig(canceller=CancellerKind.AUX_CHAIN, aux_noise_dbm=-math.inf, n_frames=2, seed=1)
    quiet = run_link(replace(base, noise_dbm=-80))
    loud = run_link(replace(base, noise_dbm=-70))
    assert quiet.mean_db - loud.mean_db == pytest.approx(10, abs=1)


def test_sweep_empty():
    assert sweep([]) == {}


def test_sweep_grid_and_permutation():
    base = LinkConfig(n_frames=2)
    grid = standard_grid(base, [math.inf, 7.14e-3, 142.86e-3])
    assert len(grid) == 12
    assert len({c.config_id for c in grid}) == 12
    subset = grid[:3]
    a = sweep(subset)
    b = sweep(list(reversed(subset)), jobs=2)
    assert a.keys() == b.keys()
    for k in a:
        assert a[k].result == b[k].result


def test_sweep_isolates_errors():
    good = LinkConfig(canceller=CancellerKind.LINEAR_FREQ, n_frames=1, config_id="ok")
    bad = LinkConfig(canceller=CancellerKind.RECONSTRUCTION, recon_k=4, recon_l=200,
                     n_frames=1, config_id="bad")
    out = sweep([good, bad])
    assert out["ok"].result is not None and out["ok"].error is None
    assert out["bad"].result is None and "frame 0" in out["bad"].error


def test_sweep_rejects_duplicate_ids():
    c = LinkConfig(config_id="x")
    with pytest.raises(ConfigError):
        sweep([c, c])
