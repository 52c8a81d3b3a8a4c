"""Least-squares estimators: linear taps, per-RE channel, Hammerstein models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import (
    DivisionGuardError,
    IllConditionedEqualizationError,
    SingularFitError,
    UndeterminedSystemError,
)
from .impairments import HammersteinModel, apply_hammerstein
from .signal import Numerology, REKind, ResourceGrid, RsPattern, Waveform, band_limit

RANK_TOL = 1e-10
EQUALIZER_GUARD = 1e-3


def solve_ls(A: np.ndarray, y: np.ndarray, labels=None) -> np.ndarray:
    """Minimize ``||y - A b||`` by column-equilibrated pivoted QR.

    Raises :class:`SingularFitError` when a pivot falls below
    ``RANK_TOL`` times the largest one; the error names the first dependent
    column via ``labels``.
    """
    n_rows, n_cols = A.shape
    if n_rows < n_cols:
        raise UndeterminedSystemError(
            f"{n_cols} coefficients but only {n_rows} observations"
        )
    norms = np.linalg.norm(A, axis=0)
    dead = np.flatnonzero(norms == 0)
    if dead.size:
        col = int(dead[0])
        label = labels[col] if labels is not None else str(col)
        raise SingularFitError(f"regressor column {label} is identically zero", col, label)
    q, r, perm = scipy.linalg.qr(A / norms, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    bad = np.flatnonzero(diag < RANK_TOL * diag[0])
    if bad.size:
        col = int(perm[bad[0]])
        label = labels[col] if labels is not None else str(col)
        raise SingularFitError(
            f"rank-deficient regression: column {label} is linearly dependent "
            f"(rank {bad[0]} of {n_cols})",
            col,
            label,
            condition=float(diag[0] / diag[-1]) if diag[-1] > 0 else np.inf,
        )
    b_perm = scipy.linalg.solve_triangular(r, q.conj().T @ y)
    b = np.empty(n_cols, dtype=np.complex128)
    b[perm] = b_perm
    return b / norms


def convolution_matrix(x: np.ndarray, l_taps: int) -> np.ndarray:
    n = x.shape[0]
    A = np.zeros((n, l_taps), dtype=np.complex128)
    for lag in range(min(l_taps, n)):
        A[lag:, lag] = x[: n - lag]
    return A


def ls_fit_time_domain(tx_ref: Waveform, rx: Waveform, l_taps: int, skip: int = 0) -> np.ndarray:
    """Taps ``h`` minimizing ``||rx - h * tx_ref||`` over rows ``skip..len(tx)-1``.

    ``skip`` lets callers prepend ``L-1`` history samples to ``tx_ref`` that
    feed the convolution without being fitted themselves.
    """
    tx = tx_ref.samples
    if len(rx) < len(tx):
        raise ValueError("rx must be at least as long as tx_ref")
    if np.count_nonzero(tx) < l_taps:
        raise SingularFitError(
            f"reference has fewer than {l_taps} nonzero samples", column=None, label="tx_ref"
        )
    A = convolution_matrix(tx, l_taps)[skip:]
    labels = [f"l={lag}" for lag in range(l_taps)]
    return solve_ls(A, rx.samples[skip : len(tx)], labels)


def basis_labels(k_terms: int, l_taps: int) -> list[str]:
    return [f"k={k}, l={lag}" for k in range(k_terms) for lag in range(l_taps)]


def build_hammerstein_basis(x: Waveform, k_terms: int, l_taps: int) -> np.ndarray:
    """Regression matrix whose column ``k*L + l`` is ``|x[n-l]|^2k x[n-l]``."""
    if len(x) < k_terms * l_taps:
        raise UndeterminedSystemError(
            f"{len(x)} samples cannot determine {k_terms * l_taps} coefficients"
        )
    return kernels.hammerstein_basis(x.samples, k_terms, l_taps)


def ls_fit_hammerstein(
    x: Waveform, y: Waveform, k_terms: int, l_taps: int, skip: int = 0
) -> HammersteinModel:
    if len(x) - skip < k_terms * l_taps:
        raise UndeterminedSystemError(
            f"{len(x) - skip} samples cannot determine {k_terms * l_taps} coefficients"
        )
    A = kernels.hammerstein_basis(x.samples, k_terms, l_taps)[skip:]
    b = solve_ls(A, y.samples[skip : len(x)], basis_labels(k_terms, l_taps))
    return HammersteinModel(b.reshape(k_terms, l_taps))


def ls_fit_hammerstein_band_limited(
    x: Waveform, z: np.ndarray, k_terms: int, l_taps: int, numerology: Numerology
) -> HammersteinModel:
    """Fit a PA model when only the in-band part of one symbol body is observed.

    ``x`` holds ``l_taps - 1`` history samples followed by the ``n_fft`` body
    samples of the PA input; ``z`` is the band-limited body of the PA output.
    Each basis column is band-limited the same way, so noiseless in-class data
    is fitted exactly.
    """
    skip = l_taps - 1
    if len(x) - skip != numerology.n_fft or z.shape[0] != numerology.n_fft:
        raise ValueError("expected one symbol body plus history")
    A = band_limit(kernels.hammerstein_basis(x.samples, k_terms, l_taps)[skip:], numerology)
    b = solve_ls(A, z, basis_labels(k_terms, l_taps))
    return HammersteinModel(b.reshape(k_terms, l_taps))


@dataclass
class FreqChannelEstimate:
    h: np.ndarray
    rs_mask: np.ndarray
    rs_symbols: np.ndarray


def _interp_weights(positions: np.ndarray, n: int):
    """Left/right anchors and weights for linear interpolation with flat ends."""
    pos = np.arange(n)
    right = np.searchsorted(positions, pos, side="left").clip(0, len(positions) - 1)
    left = np.searchsorted(positions, pos, side="right") - 1
    left = left.clip(0, len(positions) - 1)
    pl, pr = positions[left], positions[right]
    span = pr - pl
    w = np.where(span > 0, (pos - pl) / np.where(span > 0, span, 1), 0.0)
    return left, right, w


def ls_fit_freq_domain(
    rx_grid: ResourceGrid,
    pattern: RsPattern,
    ref_grid: ResourceGrid,
    start_symbol: int = 0,
) -> FreqChannelEstimate:
    """Per-RS ``rx / ref``, then linear interpolation in frequency and time."""
    kinds = pattern.tiled(rx_grid.n_sym, start_symbol)
    rs = kinds == REKind.RS
    rs_syms = np.flatnonzero(rs.any(axis=0))
    if rs_syms.size == 0:
        raise ValueError("pattern has no reference symbols in this grid")
    ref_vals = ref_grid.symbols[rs]
    if np.any(ref_vals == 0):
        sc, sym = np.nonzero(rs & (ref_grid.symbols == 0))
        raise DivisionGuardError(
            f"zero reference symbol at (subcarrier, symbol) {(int(sc[0]), int(sym[0]))}"
        )
    n_sub = rx_grid.n_sub
    at_rs = np.empty((n_sub, rs_syms.size), dtype=np.complex128)
    for j, s in enumerate(rs_syms):
        idx = np.flatnonzero(rs[:, s])
        raw = rx_grid.symbols[idx, s] / ref_grid.symbols[idx, s]
        left, right, w = _interp_weights(idx, n_sub)
        at_rs[:, j] = (1 - w) * raw[left] + w * raw[right]
    left, right, w = _interp_weights(rs_syms, rx_grid.n_sym)
    h = (1 - w) * at_rs[:, left] + w * at_rs[:, right]
    return FreqChannelEstimate(h, rs, rs_syms)


def recover_pa_output(
    rx_symbol: np.ndarray,
    chan_est,
    numerology: Numerology,
    guard: float = EQUALIZER_GUARD,
) -> Waveform:
    """Equalize one received symbol and return its time-domain body.

    Only the used subcarriers are observable, so the result is the
    band-limited PA output.
    """
    h = chan_est.h[:, 0] if isinstance(chan_est, FreqChannelEstimate) else np.asarray(chan_est)
    mag = np.abs(h)
    weak = np.flatnonzero(mag < guard * np.median(mag)) if np.any(mag > 0) else np.arange(h.size)
    if weak.size:
        raise IllConditionedEqualizationError(
            f"channel too weak to equalize on subcarriers {weak.tolist()}", weak
        )
    spectrum = np.zeros(numerology.n_fft, dtype=np.complex128)
    spectrum[numerology.bins()] = np.asarray(rx_symbol) / h
    return Waveform(np.fft.ifft(spectrum, norm="ortho"), numerology.sample_rate_hz)


@dataclass
class Precalibrator:
    model: HammersteinModel
    target_gain: complex = 1.0

    def __post_init__(self):
        if self.target_gain == 0:
            raise ValueError("target_gain must be nonzero")

    @classmethod
    def identity(cls) -> "Precalibrator":
        return cls(HammersteinModel.identity(), 1.0)

    def apply(self, x: Waveform) -> Waveform:
        return apply_hammerstein(self.model, x)


def fit_precalibrator(
    pa_in: Waveform,
    pa_out_est: Waveform,
    k_terms: int,
    l_taps: int,
    target_gain: complex,
) -> Precalibrator:
    """Fit the reversed PA function: regress ``pa_in`` on ``pa_out_est / g``."""
    if target_gain == 0:
        raise ValueError("target_gain must be nonzero")
    scaled = Waveform(pa_out_est.samples / target_gain, pa_out_est.sample_rate_hz)
    model = ls_fit_hammerstein(scaled, pa_in, k_terms, l_taps)
    return Precalibrator(model, complex(target_gain))
