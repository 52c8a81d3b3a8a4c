"""OFDM baseband construction: numerology, resource grids, RS patterns.

Subcarrier ``i`` of a grid (``0 <= i < n_sub``) maps to FFT bin
``i - n_sub/2`` for the lower half and ``i - n_sub/2 + 1`` for the upper half,
so the DC bin is never used. The DFT pair is unitary (``1/sqrt(n_fft)`` both
ways), which makes per-symbol energy identical in both domains.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from .errors import ConfigError, FramingError


class REKind(IntEnum):
    DATA = 0
    RS = 1
    L0 = 2
    H0 = 3
    NULL = 4


@dataclass(frozen=True)
class Numerology:
    n_fft: int
    n_sub: int
    cp_len: int
    scs_hz: float
    symbols_per_subframe: int = 12
    subframes_per_frame: int = 10

    def __post_init__(self):
        if self.n_fft <= 0 or self.n_fft & (self.n_fft - 1):
            raise ConfigError("must be a positive power of two", "n_fft")
        if not 0 < self.n_sub <= self.n_fft - 1 or self.n_sub % 2:
            raise ConfigError("must be even and below n_fft", "n_sub")
        if self.cp_len < 0:
            raise ConfigError("must be non-negative", "cp_len")
        if self.scs_hz <= 0:
            raise ConfigError("must be positive", "scs_hz")
        if self.symbols_per_subframe < 1 or self.subframes_per_frame < 1:
            raise ConfigError("must be positive", "symbols_per_subframe")

    @property
    def sample_rate_hz(self) -> float:
        return self.n_fft * self.scs_hz

    @property
    def symbol_len(self) -> int:
        return self.n_fft + self.cp_len

    @property
    def symbol_duration_s(self) -> float:
        return self.symbol_len / self.sample_rate_hz

    @property
    def subframe_duration_s(self) -> float:
        return self.symbols_per_subframe * self.symbol_duration_s

    @property
    def symbols_per_frame(self) -> int:
        return self.symbols_per_subframe * self.subframes_per_frame

    @property
    def frame_duration_s(self) -> float:
        return self.subframes_per_frame * self.subframe_duration_s

    @property
    def cp_efficiency(self) -> float:
        return self.n_fft / (self.n_fft + self.cp_len)

    def bins(self) -> np.ndarray:
        """FFT bin index of every used subcarrier."""
        half = self.n_sub // 2
        k = np.arange(self.n_sub)
        k = np.where(k < half, k - half, k - half + 1)
        return k % self.n_fft


# LTE 20 MHz, extended CP
FULL = Numerology(n_fft=2048, n_sub=1200, cp_len=512, scs_hz=15e3)
REDUCED = Numerology(n_fft=256, n_sub=180, cp_len=64, scs_hz=15e3)
PROFILES = {"full": FULL, "reduced": REDUCED}


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.shape[0]

    def power(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass
class ResourceGrid:
    symbols: np.ndarray
    re_kind: np.ndarray

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=np.complex128)
        self.re_kind = np.asarray(self.re_kind, dtype=np.int8)
        if self.symbols.shape != self.re_kind.shape or self.symbols.ndim != 2:
            raise ValueError("symbols and re_kind must be equal-shape matrices")

    @property
    def n_sub(self) -> int:
        return self.symbols.shape[0]

    @property
    def n_sym(self) -> int:
        return self.symbols.shape[1]

    def mask(self, kind: REKind) -> np.ndarray:
        return self.re_kind == kind

    def with_symbols(self, symbols) -> "ResourceGrid":
        return ResourceGrid(symbols, self.re_kind.copy())


class PatternKind(Enum):
    FULL_SYMBOL_PER_SUBFRAME = "full_symbol_per_subframe"
    SCATTERED_CELL_SPECIFIC = "scattered_cell_specific"
    PRECAL_FRAME = "precal_frame"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class RsPattern:
    """RE layout repeated every ``period_symbols`` symbols.

    ``layout`` is an ``n_sub x period_symbols`` matrix of :class:`REKind`
    values; everything that is not ``DATA`` counts as overhead.
    """

    kind: PatternKind
    layout: np.ndarray = field(repr=False)

    @property
    def period_symbols(self) -> int:
        return self.layout.shape[1]

    @property
    def n_sub(self) -> int:
        return self.layout.shape[0]

    @property
    def re_positions(self) -> frozenset:
        sc, sym = np.nonzero(self.layout != REKind.DATA)
        return frozenset(zip(sc.tolist(), sym.tolist()))

    def symbols_of(self, kind: REKind) -> np.ndarray:
        """Symbol indices (within one period) holding any RE of ``kind``."""
        return np.flatnonzero(np.any(self.layout == kind, axis=0))

    def tiled(self, n_sym: int, start_symbol: int = 0) -> np.ndarray:
        idx = (start_symbol + np.arange(n_sym)) % self.period_symbols
        return self.layout[:, idx]

    def check(self, numerology: Numerology) -> None:
        if self.n_sub != numerology.n_sub:
            raise ConfigError(
                f"pattern has {self.n_sub} subcarriers, numerology {numerology.n_sub}",
                "pattern",
            )


def full_symbol_per_subframe(numerology: Numerology, symbol: int = 0) -> RsPattern:
    if not 0 <= symbol < numerology.symbols_per_subframe:
        raise ConfigError("RS symbol outside subframe", "rs_symbol")
    layout = np.zeros((numerology.n_sub, numerology.symbols_per_subframe), np.int8)
    layout[:, symbol] = REKind.RS
    return RsPattern(PatternKind.FULL_SYMBOL_PER_SUBFRAME, layout)


def _scattered_layout(numerology, spacing, symbols, offsets, n_sym):
    layout = np.zeros((numerology.n_sub, n_sym), np.int8)
    for sym, off in zip(symbols, offsets):
        layout[off % spacing :: spacing, sym] = REKind.RS
    return layout


def scattered_cell_specific(
    numerology: Numerology,
    spacing: int = 6,
    symbols: tuple = (0, 3, 6, 9),
    offsets: tuple = (0, 3, 0, 3),
) -> RsPattern:
    """One-port cell-specific lattice; defaults follow LTE extended CP."""
    if len(symbols) != len(offsets):
        raise ConfigError("symbols and offsets differ in length", "rs_offsets")
    if any(not 0 <= s < numerology.symbols_per_subframe for s in symbols):
        raise ConfigError("RS symbol outside subframe", "rs_symbols")
    layout = _scattered_layout(
        numerology, spacing, symbols, offsets, numerology.symbols_per_subframe
    )
    return RsPattern(PatternKind.SCATTERED_CELL_SPECIFIC, layout)


def precal_frame(
    numerology: Numerology,
    l0_symbol: int = 1,
    h0_symbol: int = 2,
    scattered: RsPattern | None = None,
) -> RsPattern:
    """Scattered lattice for one frame plus one L0 and one H0 symbol."""
    base = scattered or scattered_cell_specific(numerology)
    n = numerology.symbols_per_frame
    layout = base.tiled(n).copy()
    for sym, kind in ((l0_symbol, REKind.L0), (h0_symbol, REKind.H0)):
        if not 0 <= sym < n:
            raise ConfigError("symbol outside frame", f"{kind.name.lower()}_symbol")
        if np.any(layout[:, sym] != REKind.DATA):
            raise ConfigError("collides with the scattered lattice", f"{kind.name.lower()}_symbol")
        layout[:, sym] = kind
    if l0_symbol == h0_symbol:
        raise ConfigError("L0 and H0 must differ", "h0_symbol")
    return RsPattern(PatternKind.PRECAL_FRAME, layout)


def custom_pattern(layout) -> RsPattern:
    return RsPattern(PatternKind.CUSTOM, np.asarray(layout, dtype=np.int8))


def _qpsk(rng, n):
    bits = rng.integers(0, 2, size=(2, n))
    return ((1 - 2 * bits[0]) + 1j * (1 - 2 * bits[1])) / np.sqrt(2)


def build_grid(
    numerology: Numerology,
    pattern: RsPattern,
    data_seed,
    rs_seed,
    n_sym: int | None = None,
    start_symbol: int = 0,
    l0_backoff_db: float = -15.0,
    h0_level_db: float = 0.0,
) -> ResourceGrid:
    """Populate a grid with unit-power QPSK data and reference symbols.

    Seeds may be ints or int sequences (anything ``np.random.default_rng``
    accepts). L0 symbols are scaled by ``l0_backoff_db`` and H0 symbols by
    ``h0_level_db`` relative to the nominal unit power.
    """
    pattern.check(numerology)
    if n_sym is None:
        n_sym = pattern.period_symbols
    kinds = pattern.tiled(n_sym, start_symbol)
    symbols = np.empty(kinds.shape, dtype=np.complex128)

    # Both streams are drawn for every RE (symbol-major) and then masked, so the
    # symbol on a given RE does not depend on the pattern.
    n = kinds.size
    data_all = _qpsk(np.random.default_rng(data_seed), n).reshape(kinds.T.shape).T
    ref_all = _qpsk(np.random.default_rng(rs_seed), n).reshape(kinds.T.shape).T
    data = kinds == REKind.DATA
    symbols[data] = data_all[data]
    ref = ~data & (kinds != REKind.NULL)
    symbols[ref] = ref_all[ref]
    symbols[kinds == REKind.L0] *= 10 ** (l0_backoff_db / 20)
    symbols[kinds == REKind.H0] *= 10 ** (h0_level_db / 20)
    symbols[kinds == REKind.NULL] = 0
    return ResourceGrid(symbols, kinds)


def ofdm_modulate(grid: ResourceGrid, numerology: Numerology) -> Waveform:
    if grid.n_sub != numerology.n_sub:
        raise ConfigError("grid does not match numerology", "n_sub")
    spectrum = np.zeros((numerology.n_fft, grid.n_sym), dtype=np.complex128)
    spectrum[numerology.bins(), :] = grid.symbols
    body = np.fft.ifft(spectrum, axis=0, norm="ortho")
    cp = numerology.cp_len
    framed = np.concatenate([body[numerology.n_fft - cp :, :], body], axis=0) if cp else body
    return Waveform(framed.T.reshape(-1), numerology.sample_rate_hz)


def symbol_spectra(samples: np.ndarray, numerology: Numerology) -> np.ndarray:
    """Full ``n_fft x n_sym`` spectra of a CP-framed sample stream."""
    samples = np.asarray(samples, dtype=np.complex128)
    if samples.shape[0] % numerology.symbol_len:
        raise FramingError(
            f"length {samples.shape[0]} is not a multiple of {numerology.symbol_len}"
        )
    framed = samples.reshape(-1, numerology.symbol_len)[:, numerology.cp_len :]
    return np.fft.fft(framed, axis=1, norm="ortho").T


def ofdm_demodulate(wave: Waveform, numerology: Numerology) -> ResourceGrid:
    spectra = symbol_spectra(wave.samples, numerology)
    symbols = spectra[numerology.bins(), :]
    kinds = np.full(symbols.shape, REKind.DATA, dtype=np.int8)
    return ResourceGrid(symbols, kinds)


def band_limit(samples: np.ndarray, numerology: Numerology) -> np.ndarray:
    """Project one symbol body (or columns of a matrix) onto the used bins."""
    spec = np.fft.fft(samples, axis=0)
    keep = np.zeros(numerology.n_fft, dtype=bool)
    keep[numerology.bins()] = True
    spec[~keep] = 0
    return np.fft.ifft(spec, axis=0)


def overhead_ratio(pattern: RsPattern, numerology: Numerology) -> float:
    pattern.check(numerology)
    if pattern.layout.size == 0:
        return 0.0
    return int(np.count_nonzero(pattern.layout != REKind.DATA)) / pattern.layout.size
