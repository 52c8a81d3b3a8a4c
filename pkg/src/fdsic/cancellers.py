"""End-to-end SI scenario realization and the digital cancellers.

One :class:`TraceBuilder` produces consecutive frames of a single
realization (data, fading channel, noise). Every canceller consumes a
:class:`ScenarioTrace` and returns a :class:`Residual`; the reported SI power
is always measured on the noise-free SI component, over data REs only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, UndeterminedSystemError
from .estimation import (
    FreqChannelEstimate,
    Precalibrator,
    fit_precalibrator,
    ls_fit_freq_domain,
    ls_fit_hammerstein,
    ls_fit_hammerstein_band_limited,
    ls_fit_time_domain,
    recover_pa_output,
)
from .impairments import (
    AuxChainCapture,
    HammersteinModel,
    SiChannel,
    add_awgn,
    apply_analog_sic,
    apply_channel,
    apply_hammerstein,
    capture_aux,
    default_pa,
    power_to_dbm,
)
from .signal import (
    Numerology,
    PatternKind,
    REDUCED,
    REKind,
    ResourceGrid,
    RsPattern,
    Waveform,
    build_grid,
    full_symbol_per_subframe,
    ofdm_demodulate,
    ofdm_modulate,
    precal_frame,
    scattered_cell_specific,
)

FULL_RATE_HZ = 30.72e6


class CancellerKind(Enum):
    LINEAR_FREQ = "linear_freq"
    LINEAR_TIME = "linear_time"
    RECONSTRUCTION = "reconstruction"
    AUX_CHAIN = "aux_chain"
    PRECAL = "precal"


def pattern_for(kind: CancellerKind, numerology: Numerology) -> RsPattern:
    if kind in (CancellerKind.RECONSTRUCTION, CancellerKind.LINEAR_TIME):
        return full_symbol_per_subframe(numerology)
    if kind is CancellerKind.PRECAL:
        return precal_frame(numerology)
    return scattered_cell_specific(numerology)


@dataclass
class ScenarioParams:
    """Physical operating point of one link-level realization.

    Channel lengths and decay are given at the 30.72 MHz LTE rate and rescaled
    to the numerology's sample rate so that the delay profile in seconds is
    the same for every profile.
    """

    numerology: Numerology = REDUCED
    pa: HammersteinModel = field(default_factory=default_pa)
    tx_power_dbm: float = 23.0
    noise_dbm: float = -90.0
    analog_sic_db: float = 50.0
    coherence_time_s: float = math.inf
    base_taps_full_rate: int = 8
    delay_spread_mult: int = 4
    decay_db_per_tap_full_rate: float = 3.0
    aux_noise_dbm: float = -60.0
    l0_backoff_db: float = -15.0
    h0_level_db: float = 0.0
    seed: int = 0

    @property
    def rate_ratio(self) -> float:
        return FULL_RATE_HZ / self.numerology.sample_rate_hz

    @property
    def base_taps(self) -> int:
        return max(1, math.ceil(self.base_taps_full_rate / self.rate_ratio))

    @property
    def residual_taps(self) -> int:
        return self.base_taps * self.delay_spread_mult

    def si_channel(self) -> SiChannel:
        num = self.numerology
        decay = self.decay_db_per_tap_full_rate * self.rate_ratio
        base = SiChannel.exponential(
            self.base_taps,
            decay,
            0.0,
            self.coherence_time_s,
            num.symbol_duration_s,
            num.symbol_len,
            self.seed,
        )
        return apply_analog_sic(base, self.analog_sic_db, self.delay_spread_mult, decay)


@dataclass
class ScenarioTrace:
    numerology: Numerology
    pattern: RsPattern
    frame_index: int
    start_symbol: int
    tx_grid: ResourceGrid
    tx_pre_pa: Waveform
    pa_in: Waveform
    pa_out: Waveform
    aux: AuxChainCapture | None
    si: Waveform
    rx: Waveform
    channel_truth: np.ndarray
    history: np.ndarray

    @property
    def data_mask(self) -> np.ndarray:
        return self.tx_grid.re_kind == REKind.DATA

    def tx_with_history(self, start: int, stop: int, n_hist: int) -> np.ndarray:
        """``tx_pre_pa[start - n_hist : stop]``, reaching into the previous frame."""
        ext = np.concatenate([self.history, self.tx_pre_pa.samples])
        off = self.history.shape[0]
        if start - n_hist + off < 0:
            raise ValueError("not enough history retained")
        return ext[start - n_hist + off : stop + off]


class TraceBuilder:
    """Generates consecutive frames of one scenario realization.

    Random streams are keyed by (seed, purpose, frame) so that runs with the
    same seed share the fading and noise realization whatever the canceller.
    """

    HISTORY = 64

    def __init__(self, params: ScenarioParams, pattern: RsPattern):
        pattern.check(params.numerology)
        self.params = params
        self.pattern = pattern
        self.channel = params.si_channel()
        self.frame_index = 0
        self._tx_tail = np.zeros(self.HISTORY, dtype=np.complex128)
        self._pa_in_tail = np.zeros(self.HISTORY, dtype=np.complex128)
        self._drive = math.sqrt(params.numerology.n_fft / params.numerology.n_sub)

    def _with_tail(self, tail, samples, n):
        if n <= 0:
            return samples
        return np.concatenate([tail[-n:], samples])

    def next_frame(self, precal: Precalibrator | None = None) -> ScenarioTrace:
        p = self.params
        num = p.numerology
        f = self.frame_index
        n_sym = num.symbols_per_frame
        start = (f * n_sym) % self.pattern.period_symbols
        grid = build_grid(
            num, self.pattern, [p.seed, 10, f], [p.seed, 11, f],
            n_sym=n_sym, start_symbol=start,
            l0_backoff_db=p.l0_backoff_db, h0_level_db=p.h0_level_db,
        )
        tx_grid = grid.with_symbols(grid.symbols * self._drive)
        tx_pre_pa = ofdm_modulate(tx_grid, num)
        fs = num.sample_rate_hz
        x = tx_pre_pa.samples
        if precal is not None:
            n = precal.model.l_taps - 1
            u = apply_hammerstein(precal.model, Waveform(self._with_tail(self._tx_tail, x, n), fs))
            pa_in = Waveform(u.samples[n:], fs)
        else:
            pa_in = Waveform(x.copy(), fs)
        n = p.pa.l_taps - 1
        y = apply_hammerstein(p.pa, Waveform(self._with_tail(self._pa_in_tail, pa_in.samples, n), fs))
        pa_out = Waveform(y.samples[n:] * 10 ** (p.tx_power_dbm / 20), fs)
        aux = capture_aux(pa_out, p.aux_noise_dbm, [p.seed, 13, f])
        si, snaps = apply_channel(self.channel, pa_out, advance_fading=True, return_taps=True)
        rx = add_awgn(si, p.noise_dbm, [p.seed, 12, f])
        trace = ScenarioTrace(
            num, self.pattern, f, start, tx_grid, tx_pre_pa, pa_in, pa_out, aux,
            si, rx, snaps, self._tx_tail.copy(),
        )
        self._tx_tail = x[-self.HISTORY:].copy()
        self._pa_in_tail = pa_in.samples[-self.HISTORY:].copy()
        self.frame_index += 1
        return trace


@dataclass
class Residual:
    samples: Waveform
    per_subframe_power_dbm: np.ndarray
    grid: np.ndarray = field(repr=False, default=None)


def subframe_power_dbm(symbols: np.ndarray, mask: np.ndarray, numerology: Numerology) -> np.ndarray:
    """Mean power over the masked REs of each subframe, per-sample dBm scale."""
    spf = numerology.symbols_per_subframe
    n_sf = symbols.shape[1] // spf
    p = np.abs(symbols[:, : n_sf * spf]) ** 2
    m = mask[:, : n_sf * spf]
    sums = (p * m).reshape(symbols.shape[0], n_sf, spf).sum(axis=(0, 2))
    counts = m.reshape(symbols.shape[0], n_sf, spf).sum(axis=(0, 2))
    mean = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    return power_to_dbm(mean * numerology.n_sub / numerology.n_fft)


def si_power_dbm(trace: ScenarioTrace) -> np.ndarray:
    si_grid = ofdm_demodulate(trace.si, trace.numerology)
    return subframe_power_dbm(si_grid.symbols, trace.data_mask, trace.numerology)


def cancellation_db(rx_si_power, residual_power) -> np.ndarray:
    a = np.asarray(rx_si_power, dtype=float)
    b = np.asarray(residual_power, dtype=float)
    if a.shape != b.shape:
        raise ValueError("power series differ in length")
    with np.errstate(invalid="ignore"):
        return a - b


def _freq_residual(trace, rx_grid, est: FreqChannelEstimate, ref_symbols) -> Residual:
    num = trace.numerology
    recon = est.h * ref_symbols
    res = rx_grid.symbols - recon
    recon_wave = ofdm_modulate(ResourceGrid(recon, trace.tx_grid.re_kind), num)
    samples = Waveform(trace.rx.samples - recon_wave.samples, num.sample_rate_hz)
    return Residual(samples, subframe_power_dbm(res, trace.data_mask, num), res)


def _time_residual(trace, samples: np.ndarray) -> Residual:
    num = trace.numerology
    res = ofdm_demodulate(Waveform(samples, num.sample_rate_hz), num).symbols
    return Residual(
        Waveform(samples, num.sample_rate_hz),
        subframe_power_dbm(res, trace.data_mask, num),
        res,
    )


def _require(trace, kinds, name):
    if trace.pattern.kind not in kinds:
        raise ConfigError(
            f"{name} needs a {' or '.join(k.value for k in kinds)} pattern, "
            f"got {trace.pattern.kind.value}",
            "pattern",
        )


def cancel_linear_freq(trace: ScenarioTrace) -> Residual:
    _require(
        trace,
        (PatternKind.SCATTERED_CELL_SPECIFIC, PatternKind.PRECAL_FRAME, PatternKind.CUSTOM),
        "linear frequency-domain cancellation",
    )
    rx_grid = ofdm_demodulate(trace.rx, trace.numerology)
    est = ls_fit_freq_domain(rx_grid, trace.pattern, trace.tx_grid, trace.start_symbol)
    return _freq_residual(trace, rx_grid, est, trace.tx_grid.symbols)


def cancel_aux_chain(trace: ScenarioTrace) -> Residual:
    if trace.aux is None:
        raise ConfigError("scenario has no auxiliary receive chain capture", "aux")
    _require(
        trace,
        (PatternKind.SCATTERED_CELL_SPECIFIC, PatternKind.CUSTOM),
        "auxiliary-chain cancellation",
    )
    num = trace.numerology
    rx_grid = ofdm_demodulate(trace.rx, num)
    aux_grid = ofdm_demodulate(Waveform(trace.aux.samples, num.sample_rate_hz), num)
    est = ls_fit_freq_domain(rx_grid, trace.pattern, aux_grid, trace.start_symbol)
    return _freq_residual(trace, rx_grid, est, aux_grid.symbols)


def _rs_symbol_in_subframe(trace) -> int:
    syms = trace.pattern.symbols_of(REKind.RS)
    if syms.size != 1:
        raise ConfigError("expected exactly one RS symbol per subframe", "pattern")
    return int(syms[0])


def _per_subframe_time_domain(trace, n_hist, fit, reconstruct) -> Residual:
    num = trace.numerology
    sl, spf = num.symbol_len, num.symbols_per_subframe
    rs_sym = _rs_symbol_in_subframe(trace)
    if n_hist > trace.history.shape[0]:
        raise ConfigError(
            f"memory of {n_hist + 1} taps exceeds the {trace.history.shape[0]} retained "
            "history samples", "taps"
        )
    rx = trace.rx.samples
    fs = num.sample_rate_hz
    out = rx.copy()
    for sf in range(len(trace.tx_pre_pa) // (sl * spf)):
        s0 = (sf * spf + rs_sym) * sl
        x_fit = trace.tx_with_history(s0, s0 + sl, n_hist)
        y_fit = np.concatenate([np.zeros(n_hist, np.complex128), rx[s0 : s0 + sl]])
        model = fit(Waveform(x_fit, fs), Waveform(y_fit, fs))
        a, b = sf * spf * sl, (sf + 1) * spf * sl
        x_sub = trace.tx_with_history(a, b, n_hist)
        cand = rx[a:b] - reconstruct(model, x_sub)[n_hist:]
        # divergence guard: a stale model under fast fading can add power;
        # the receiver sees both energies and keeps the smaller
        if np.vdot(cand, cand).real < np.vdot(rx[a:b], rx[a:b]).real:
            out[a:b] = cand
    return _time_residual(trace, out)


def cancel_reconstruction(trace: ScenarioTrace, k_terms: int, l_total: int) -> Residual:
    """Joint PA-plus-channel Hammerstein fit on each subframe's RS symbol."""
    _require(
        trace, (PatternKind.FULL_SYMBOL_PER_SUBFRAME,), "reconstruction-based cancellation"
    )
    if k_terms * l_total > trace.numerology.symbol_len:
        raise UndeterminedSystemError(
            f"one RS symbol has {trace.numerology.symbol_len} samples but the model "
            f"has {k_terms * l_total} coefficients"
        )
    n_hist = l_total - 1
    return _per_subframe_time_domain(
        trace,
        n_hist,
        lambda x, y: ls_fit_hammerstein(x, y, k_terms, l_total, skip=n_hist),
        lambda model, x: apply_hammerstein(model, Waveform(x, 1.0)).samples,
    )


def cancel_linear_time(trace: ScenarioTrace, l_taps: int) -> Residual:
    _require(
        trace, (PatternKind.FULL_SYMBOL_PER_SUBFRAME,), "time-domain linear cancellation"
    )
    n_hist = l_taps - 1
    return _per_subframe_time_domain(
        trace,
        n_hist,
        lambda x, y: ls_fit_time_domain(x, y, l_taps, skip=n_hist),
        lambda taps, x: np.convolve(x, taps)[: x.shape[0]],
    )


@dataclass
class CalibrationResult:
    precal: Precalibrator
    pa_estimate: HammersteinModel


def calibrate_from_trace(
    trace: ScenarioTrace,
    k_pa: int = 2,
    l_pa: int = 2,
    k_pc: int = 3,
    l_pc: int = 2,
) -> CalibrationResult:
    """Over-the-air pre-calibrator from the frame's L0/H0 symbols.

    L0 gives the channel, which equalizes H0 into the in-band PA output; a PA
    model is fitted to that, and the pre-calibrator is the LS reversed
    function of the model, normalized by its linear gain.
    """
    num = trace.numerology
    l0 = np.flatnonzero(np.any(trace.tx_grid.re_kind == REKind.L0, axis=0))
    h0 = np.flatnonzero(np.any(trace.tx_grid.re_kind == REKind.H0, axis=0))
    if l0.size != 1 or h0.size != 1:
        raise ConfigError("frame must carry exactly one L0 and one H0 symbol", "pattern")
    s0, s1 = int(l0[0]), int(h0[0])
    rx_grid = ofdm_demodulate(trace.rx, num)
    h = rx_grid.symbols[:, s0] / trace.tx_grid.symbols[:, s0]
    z = recover_pa_output(rx_grid.symbols[:, s1], h, num).samples
    body = s1 * num.symbol_len + num.cp_len
    seg = trace.pa_in.samples[body - (l_pa - 1) : body + num.n_fft]
    fs = num.sample_rate_hz
    pa_est = ls_fit_hammerstein_band_limited(Waveform(seg, fs), z, k_pa, l_pa, num)
    y_est = apply_hammerstein(pa_est, trace.pa_in)
    precal = fit_precalibrator(trace.pa_in, y_est, k_pc, l_pc, pa_est.linear_gain)
    return CalibrationResult(precal, pa_est)


@dataclass
class PrecalFrame:
    trace: ScenarioTrace
    residual: Residual
    precal_used: Precalibrator
    calibration: CalibrationResult


def cancel_precalibrated(
    builder: TraceBuilder,
    precal: Precalibrator | None = None,
    n_frames: int = 1,
    k_pa: int = 2,
    l_pa: int = 2,
    k_pc: int = 3,
    l_pc: int = 2,
) -> list[PrecalFrame]:
    """Run ``n_frames`` frames with pre-calibration and linear cancellation.

    Each frame is transmitted through the current pre-calibrator (identity
    when ``precal`` is None) and a new one is fitted from that frame's L0/H0
    symbols for use in the next frame.
    """
    _require_builder = builder.pattern.kind is PatternKind.PRECAL_FRAME
    if not _require_builder:
        raise ConfigError("pre-calibration needs a precal_frame pattern", "pattern")
    current = precal or Precalibrator.identity()
    frames = []
    for _ in range(n_frames):
        trace = builder.next_frame(current)
        residual = cancel_linear_freq(trace)
        cal = calibrate_from_trace(trace, k_pa, l_pa, k_pc, l_pc)
        frames.append(PrecalFrame(trace, residual, current, cal))
        current = cal.precal
    return frames


def transmit_evm(pa_out: np.ndarray, trace: ScenarioTrace) -> float:
    """RMS EVM of a PA output on the data REs, after per-subcarrier equalization.

    The equalizer is the LS complex gain per subcarrier over the frame, as an
    LTE-style receiver would apply; returns a linear ratio.
    """
    num = trace.numerology
    y = ofdm_demodulate(Waveform(pa_out, num.sample_rate_hz), num).symbols
    x = trace.tx_grid.symbols
    m = trace.data_mask
    num_ = np.sum(np.where(m, y * np.conj(x), 0), axis=1)
    den = np.sum(np.where(m, np.abs(x) ** 2, 0), axis=1)
    gain = np.where(den > 0, num_ / np.where(den > 0, den, 1), 0)
    err = np.where(m, y - gain[:, None] * x, 0)
    ref = np.where(m, gain[:, None] * x, 0)
    return float(np.sqrt(np.sum(np.abs(err) ** 2) / np.sum(np.abs(ref) ** 2)))
