"""Link-level harness: run one canceller over a fading SI scenario and
summarize cancellation per subframe."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .cancellers import (
    CancellerKind,
    ScenarioParams,
    TraceBuilder,
    cancel_aux_chain,
    cancel_linear_freq,
    cancel_linear_time,
    cancel_precalibrated,
    cancel_reconstruction,
    cancellation_db,
    pattern_for,
    si_power_dbm,
)
from .errors import ConfigError, FdsicError, LinkRunError
from .impairments import HammersteinModel, default_pa
from .signal import PROFILES


@dataclass(frozen=True)
class LinkConfig:
    canceller: CancellerKind = CancellerKind.RECONSTRUCTION
    profile: str = "reduced"
    pa: HammersteinModel | None = field(default=None, compare=False)
    tx_power_dbm: float = 23.0
    noise_dbm: float = -90.0
    analog_sic_db: float = 50.0
    coherence_time_s: float = math.inf
    aux_noise_dbm: float = -60.0
    base_taps_full_rate: int = 8
    delay_spread_mult: int = 4
    decay_db_per_tap_full_rate: float = 3.0
    l0_backoff_db: float = -15.0
    h0_level_db: float = 0.0
    recon_k: int = 4
    recon_l: int | None = None  # default: PA taps + residual channel taps
    linear_l: int | None = None  # default: residual channel taps
    pa_fit_k: int = 2
    pa_fit_l: int = 2
    precal_k: int = 3
    precal_l: int = 2
    n_frames: int = 3
    seed: int = 0
    config_id: str = ""

    def __post_init__(self):
        if isinstance(self.canceller, str):
            try:
                object.__setattr__(self, "canceller", CancellerKind(self.canceller))
            except ValueError:
                raise ConfigError(f"unknown canceller {self.canceller!r}", "canceller") from None
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}", "profile")
        if self.analog_sic_db < 0:
            raise ConfigError("must be >= 0", "analog_sic_db")
        if self.coherence_time_s <= 0:
            raise ConfigError("must be > 0 (use inf for a static channel)", "coherence_time_s")
        if self.n_frames < 1:
            raise ConfigError("must be >= 1", "n_frames")
        if self.canceller is CancellerKind.PRECAL and self.n_frames < 2:
            raise ConfigError("pre-calibration needs >= 2 frames (frame 0 is a cold start)",
                              "n_frames")
        for key in ("recon_k", "pa_fit_k", "pa_fit_l", "precal_k", "precal_l"):
            if getattr(self, key) < 1:
                raise ConfigError("must be >= 1", key)

    @property
    def coherence_ms(self) -> float:
        return self.coherence_time_s * 1e3

    def scenario(self) -> ScenarioParams:
        return ScenarioParams(
            numerology=PROFILES[self.profile],
            pa=self.pa if self.pa is not None else default_pa(),
            tx_power_dbm=self.tx_power_dbm,
            noise_dbm=self.noise_dbm,
            analog_sic_db=self.analog_sic_db,
            coherence_time_s=self.coherence_time_s,
            base_taps_full_rate=self.base_taps_full_rate,
            delay_spread_mult=self.delay_spread_mult,
            decay_db_per_tap_full_rate=self.decay_db_per_tap_full_rate,
            aux_noise_dbm=self.aux_noise_dbm,
            l0_backoff_db=self.l0_backoff_db,
            h0_level_db=self.h0_level_db,
            seed=self.seed,
        )


@dataclass
class LinkResult:
    config_id: str
    canceller: CancellerKind
    coherence_time_s: float
    seed: int
    frame: np.ndarray
    subframe: np.ndarray
    cancellation_db: np.ndarray
    mean_db: float
    median_db: float
    analog_sic_db: float
    residual_evm: float
    sim_time_s: float

    @property
    def total_mean_db(self) -> float:
        return self.analog_sic_db + self.mean_db

    def __eq__(self, other):
        if not isinstance(other, LinkResult):
            return NotImplemented
        a, b = asdict(self), asdict(other)
        return all(
            np.array_equal(a[k], b[k]) if isinstance(a[k], np.ndarray) else a[k] == b[k]
            for k in a
        )


def _frame_series(cfg: LinkConfig, params: ScenarioParams):
    """Yield ``(frame, si_dbm, residual_dbm)`` per frame."""
    kind = cfg.canceller
    builder = TraceBuilder(params, pattern_for(kind, params.numerology))
    if kind is CancellerKind.PRECAL:
        frames = cancel_precalibrated(
            builder, None, cfg.n_frames, cfg.pa_fit_k, cfg.pa_fit_l, cfg.precal_k, cfg.precal_l
        )
        for fr in frames:
            yield fr.trace.frame_index, si_power_dbm(fr.trace), fr.residual.per_subframe_power_dbm
        return
    for _ in range(cfg.n_frames):
        trace = builder.next_frame()
        if kind is CancellerKind.LINEAR_FREQ:
            res = cancel_linear_freq(trace)
        elif kind is CancellerKind.AUX_CHAIN:
            res = cancel_aux_chain(trace)
        elif kind is CancellerKind.RECONSTRUCTION:
            l_total = cfg.recon_l or params.pa.l_taps + params.residual_taps
            res = cancel_reconstruction(trace, cfg.recon_k, l_total)
        else:
            res = cancel_linear_time(trace, cfg.linear_l or params.residual_taps)
        yield trace.frame_index, si_power_dbm(trace), res.per_subframe_power_dbm


def run_link(cfg: LinkConfig) -> LinkResult:
    """Run ``cfg.n_frames`` frames and aggregate cancellation per subframe.

    The series drops the pre-calibration cold-start frame. ``mean_db`` and
    ``median_db`` always exclude frame 0 (when more than one frame ran).
    """
    params = cfg.scenario()
    num = params.numerology
    frames, subframes, canc, si_lin, res_lin = [], [], [], [], []
    frame = 0
    try:
        for frame, si, res in _frame_series(cfg, params):
            if cfg.canceller is CancellerKind.PRECAL and frame == 0:
                continue
            n = si.shape[0]
            frames.append(np.full(n, frame))
            subframes.append(frame * num.subframes_per_frame + np.arange(n))
            canc.append(cancellation_db(si, res))
            si_lin.append(10 ** (si / 10))
            res_lin.append(10 ** (res / 10))
    except FdsicError as exc:
        raise LinkRunError(
            f"{cfg.config_id or cfg.canceller.value} seed {cfg.seed}, frame {frame}: {exc}",
            frame,
        ) from exc
    frame = np.concatenate(frames)
    canc = np.concatenate(canc)
    keep = frame > 0 if np.any(frame > 0) else np.ones_like(frame, dtype=bool)
    si_lin, res_lin = np.concatenate(si_lin)[keep], np.concatenate(res_lin)[keep]
    return LinkResult(
        config_id=cfg.config_id,
        canceller=cfg.canceller,
        coherence_time_s=cfg.coherence_time_s,
        seed=cfg.seed,
        frame=frame,
        subframe=np.concatenate(subframes),
        cancellation_db=canc,
        mean_db=float(np.mean(canc[keep])),
        median_db=float(np.median(canc[keep])),
        analog_sic_db=cfg.analog_sic_db,
        residual_evm=float(np.sqrt(res_lin.sum() / si_lin.sum())),
        sim_time_s=cfg.n_frames * num.frame_duration_s,
    )


@dataclass
class SweepEntry:
    config: LinkConfig
    result: LinkResult | None
    error: str | None = None


def _run_isolated(cfg: LinkConfig) -> SweepEntry:
    try:
        return SweepEntry(cfg, run_link(cfg))
    except FdsicError as exc:
        return SweepEntry(cfg, None, f"{type(exc).__name__}: {exc}")


def sweep(configs, jobs: int = 1) -> dict[str, SweepEntry]:
    """Run independent configs, keyed by ``config_id``.

    Configs without an id get ``"<index>"``. A failing config records its
    error without affecting the others.
    """
    configs = [
        c if c.config_id else replace(c, config_id=str(i)) for i, c in enumerate(configs)
    ]
    ids = [c.config_id for c in configs]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate config ids in sweep", "config_id")
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_run_isolated, configs))
    else:
        entries = [_run_isolated(c) for c in configs]
    return {e.config.config_id: e for e in entries}


def standard_grid(base: LinkConfig, coherence_times_s, cancellers=None) -> list[LinkConfig]:
    """Cancellers x coherence times, one config each."""
    cancellers = cancellers or [
        CancellerKind.LINEAR_FREQ,
        CancellerKind.RECONSTRUCTION,
        CancellerKind.AUX_CHAIN,
        CancellerKind.PRECAL,
    ]
    out = []
    for tc in coherence_times_s:
        for kind in cancellers:
            tag = "static" if math.isinf(tc) else f"{tc * 1e3:.2f}ms"
            out.append(replace(base, canceller=kind, coherence_time_s=tc,
                               config_id=f"{kind.value}@{tag}/seed{base.seed}"))
    return out
