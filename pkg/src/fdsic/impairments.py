"""Transmit/receive impairments: PA, SI channel, analog SIC, noise.

Power convention: a waveform with unit mean sample power is at 0 dBm.
"""
from __future__ import annotations

import copy
import functools
import importlib.resources
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .signal import Waveform


def dbm_to_power(dbm: float) -> float:
    return 0.0 if dbm == -math.inf else 10.0 ** (dbm / 10.0)


def power_to_dbm(power) -> np.ndarray | float:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(power)


@dataclass
class HammersteinModel:
    """Odd-order memory polynomial ``y[n] = sum b[k,l] |x[n-l]|^2k x[n-l]``.

    ``coeffs`` is ``K x L``: row ``k`` is the ``(2k+1)``-th order branch, column
    ``l`` the memory tap.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.array(np.atleast_2d(self.coeffs), dtype=np.complex128)
        if self.coeffs.ndim != 2 or min(self.coeffs.shape) < 1:
            raise ValueError("coeffs must be a non-empty K x L matrix")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coeffs must be finite")

    @property
    def k_terms(self) -> int:
        return self.coeffs.shape[0]

    @property
    def l_taps(self) -> int:
        return self.coeffs.shape[1]

    @property
    def order(self) -> int:
        return 2 * self.k_terms - 1

    @property
    def n_coeffs(self) -> int:
        return self.coeffs.size

    @property
    def linear_gain(self) -> complex:
        """DC gain of the first-order branch."""
        return complex(self.coeffs[0].sum())

    @classmethod
    def identity(cls, k_terms: int = 1, l_taps: int = 1) -> "HammersteinModel":
        c = np.zeros((k_terms, l_taps), dtype=np.complex128)
        c[0, 0] = 1.0
        return cls(c)


@functools.lru_cache(maxsize=1)
def _default_pa_coeffs() -> np.ndarray:
    from .io import read_pa_coeffs

    path = importlib.resources.files("fdsic") / "data" / "pa_default.txt"
    with importlib.resources.as_file(path) as p:
        return read_pa_coeffs(p).coeffs


def default_pa() -> HammersteinModel:
    """The shipped synthetic 3rd-order PA (``data/pa_default.txt``)."""
    return HammersteinModel(_default_pa_coeffs().copy())


def apply_hammerstein(model: HammersteinModel, x: Waveform) -> Waveform:
    return Waveform(kernels.hammerstein_apply(x.samples, model.coeffs), x.sample_rate_hz)


def coherence_time(speed_mps: float, carrier_hz: float, c: float = 3e8) -> float:
    """``1 / f_d`` with Doppler ``f_d = v f_c / c``; infinite for a static node."""
    if speed_mps < 0:
        raise ValueError("speed must be non-negative")
    if speed_mps == 0:
        return math.inf
    return c / (speed_mps * carrier_hz)


def fading_corr_from_coherence(t_c: float, step_s: float) -> float:
    if step_s <= 0 or t_c <= 0:
        raise ValueError("coherence time and step must be positive")
    return min(1.0, max(0.0, math.exp(-step_s / t_c)))


def exponential_profile(l_taps: int, decay_db_per_tap: float) -> np.ndarray:
    p = 10.0 ** (-decay_db_per_tap * np.arange(l_taps) / 10.0)
    return p / p.sum()


@dataclass
class SiChannel:
    """Tapped-delay-line SI channel with per-tap Gauss-Markov fading.

    Taps evolve once per ``symbol_len`` samples as
    ``h <- rho h + sqrt(1 - rho^2) w``, ``w ~ CN(0, profile)``. The object is
    stateful (taps, rng, input history) and must not be shared across threads.
    """

    tap_gains: np.ndarray
    profile: np.ndarray
    coherence_time_s: float = math.inf
    step_s: float = 1.0
    symbol_len: int = 1
    power_gain_db: float = 0.0
    seed: int = 0
    decay_db_per_tap: float = 3.0
    rng: np.random.Generator = field(default=None, repr=False)
    history: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.tap_gains = np.asarray(self.tap_gains, dtype=np.complex128)
        self.profile = np.asarray(self.profile, dtype=float)
        if self.tap_gains.shape != self.profile.shape or self.tap_gains.size < 1:
            raise ValueError("tap_gains and profile must be equal-length, non-empty")
        if self.rng is None:
            self.rng = np.random.default_rng([self.seed, 1])
        if self.history is None:
            self.history = np.zeros(self.l_taps - 1, dtype=np.complex128)

    @classmethod
    def exponential(
        cls,
        l_taps: int,
        decay_db_per_tap: float = 3.0,
        power_gain_db: float = 0.0,
        coherence_time_s: float = math.inf,
        step_s: float = 1.0,
        symbol_len: int = 1,
        seed: int = 0,
    ) -> "SiChannel":
        if l_taps < 1:
            raise ValueError("l_taps must be >= 1")
        profile = exponential_profile(l_taps, decay_db_per_tap)
        init = np.random.default_rng([seed, 0, l_taps])
        taps = np.sqrt(profile / 2) * (
            init.standard_normal(l_taps) + 1j * init.standard_normal(l_taps)
        )
        return cls(
            taps, profile, coherence_time_s, step_s, symbol_len,
            power_gain_db, seed, decay_db_per_tap,
        )

    @property
    def l_taps(self) -> int:
        return self.tap_gains.shape[0]

    @property
    def fading_corr(self) -> float:
        if math.isinf(self.coherence_time_s):
            return 1.0
        return fading_corr_from_coherence(self.coherence_time_s, self.step_s)

    @property
    def amplitude(self) -> float:
        return 10.0 ** (self.power_gain_db / 20.0)

    def advance(self) -> None:
        rho = self.fading_corr
        if rho >= 1.0:
            return
        w = np.sqrt(self.profile / 2) * (
            self.rng.standard_normal(self.l_taps) + 1j * self.rng.standard_normal(self.l_taps)
        )
        self.tap_gains = rho * self.tap_gains + math.sqrt(1.0 - rho * rho) * w

    def copy(self) -> "SiChannel":
        return copy.deepcopy(self)


def apply_channel(
    ch: SiChannel, x: Waveform, advance_fading: bool = True, return_taps: bool = False
):
    """Convolve ``x`` with the channel, continuing from the previous call.

    With ``advance_fading`` the taps step once per ``ch.symbol_len`` samples
    (the current taps apply to the first block). With ``return_taps`` the
    per-block tap snapshots are returned alongside the waveform.
    """
    n = len(x)
    n_blocks = max(1, -(-n // ch.symbol_len))
    if advance_fading:
        snaps = np.empty((n_blocks, ch.l_taps), dtype=np.complex128)
        for b in range(n_blocks):
            snaps[b] = ch.tap_gains
            ch.advance()
    else:
        snaps = np.tile(ch.tap_gains, (n_blocks, 1))
    y = kernels.tdl_filter(x.samples, snaps, ch.symbol_len, ch.history) * ch.amplitude
    if ch.l_taps > 1:
        ch.history = np.concatenate([ch.history, x.samples])[-(ch.l_taps - 1):]
    out = Waveform(y, x.sample_rate_hz)
    return (out, snaps) if return_taps else out


def apply_analog_sic(
    ch: SiChannel,
    sic_db: float,
    delay_spread_mult: int = 1,
    decay_db_per_tap: float | None = None,
) -> SiChannel:
    """Residual channel after analog cancellation.

    Gain drops by ``sic_db``. With ``delay_spread_mult > 1`` the channel is
    redrawn (from its own seed) with ``L * mult`` taps on an exponential
    profile; with ``mult == 1`` the taps are kept.
    """
    if sic_db < 0:
        raise ValueError("sic_db must be >= 0")
    if delay_spread_mult < 1 or int(delay_spread_mult) != delay_spread_mult:
        raise ValueError("delay_spread_mult must be a positive integer")
    if delay_spread_mult == 1 and decay_db_per_tap is None:
        out = ch.copy()
        out.power_gain_db = ch.power_gain_db - sic_db
        return out
    decay = ch.decay_db_per_tap if decay_db_per_tap is None else decay_db_per_tap
    return SiChannel.exponential(
        ch.l_taps * int(delay_spread_mult),
        decay,
        ch.power_gain_db - sic_db,
        ch.coherence_time_s,
        ch.step_s,
        ch.symbol_len,
        ch.seed,
    )


def add_awgn(x: Waveform, noise_dbm: float, seed) -> Waveform:
    if noise_dbm == -math.inf:
        return Waveform(x.samples.copy(), x.sample_rate_hz)
    rng = np.random.default_rng(seed)
    n = len(x)
    noise = math.sqrt(dbm_to_power(noise_dbm) / 2) * (
        rng.standard_normal(n) + 1j * rng.standard_normal(n)
    )
    return Waveform(x.samples + noise, x.sample_rate_hz)


@dataclass
class AuxChainCapture:
    samples: np.ndarray
    noise_power_dbm: float


def capture_aux(y_pa: Waveform, capture_noise_dbm: float, seed) -> AuxChainCapture:
    noisy = add_awgn(y_pa, capture_noise_dbm, seed)
    return AuxChainCapture(noisy.samples, capture_noise_dbm)
