"""System-level SINR and Shannon throughput over a path-loss topology.

Every BS serves its associated MSs; all nodes transmit at full buffer. In
full duplex each MS also transmits uplink, so a downlink MS hears the other
MSs' uplink (dropped under perfect scheduling) and each BS hears the other
BSs plus its own residual self-interference.

Topology file (text, ``#`` comments allowed)::

    fdsic-topology 1
    n_bs <int>
    n_ms <int>
    pathloss_bs_ms          <- n_bs rows of n_ms dB values
    pathloss_ms_ms          <- n_ms rows of n_ms dB values, symmetric
    pathloss_bs_bs          <- n_bs rows of n_bs dB values, symmetric
    association <n_ms BS indices> | auto     (optional, default auto)

Diagonals of the square matrices are ignored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import TopologyError
from .impairments import dbm_to_power

TOPOLOGY_MAGIC = "fdsic-topology"
TOPOLOGY_VERSION = 1


class DuplexMode(Enum):
    HALF_DUPLEX_FDD = "hd_fdd"
    FULL_DUPLEX = "fd"


class Scheduling(Enum):
    RANDOM = "random"
    PERFECT = "perfect"


class HdBandRule(Enum):
    DL_FULL_BAND = "dl_full_band"  # HD downlink gets the whole bandwidth
    SPLIT_BAND = "split_band"  # HD splits the bandwidth between DL and UL


@dataclass
class Topology:
    pathloss_bs_ms: np.ndarray
    pathloss_ms_ms: np.ndarray
    pathloss_bs_bs: np.ndarray
    association: np.ndarray
    bs_xy: np.ndarray | None = field(default=None, repr=False)
    ms_xy: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.pathloss_bs_ms = np.atleast_2d(np.asarray(self.pathloss_bs_ms, dtype=float))
        self.pathloss_ms_ms = np.atleast_2d(np.asarray(self.pathloss_ms_ms, dtype=float))
        self.pathloss_bs_bs = np.atleast_2d(np.asarray(self.pathloss_bs_bs, dtype=float))
        self.association = np.asarray(self.association, dtype=int).reshape(-1)
        self.validate()

    @property
    def n_bs(self) -> int:
        return self.pathloss_bs_ms.shape[0]

    @property
    def n_ms(self) -> int:
        return self.pathloss_bs_ms.shape[1]

    def validate(self) -> None:
        nb, nm = self.pathloss_bs_ms.shape
        if nb < 1 or nm < 1:
            raise TopologyError("need at least one BS and one MS")
        if self.pathloss_ms_ms.shape != (nm, nm):
            raise TopologyError(f"pathloss_ms_ms must be {nm}x{nm}")
        if self.pathloss_bs_bs.shape != (nb, nb):
            raise TopologyError(f"pathloss_bs_bs must be {nb}x{nb}")
        for name in ("pathloss_bs_ms", "pathloss_ms_ms", "pathloss_bs_bs"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise TopologyError(f"{name} has non-finite entries")
        for name in ("pathloss_ms_ms", "pathloss_bs_bs"):
            m = getattr(self, name)
            if not np.array_equal(m, m.T):
                raise TopologyError(f"{name} is not symmetric")
        if self.association.shape != (nm,):
            raise TopologyError(f"association must list {nm} BS indices")
        if np.any((self.association < 0) | (self.association >= nb)):
            raise TopologyError("association refers to a nonexistent BS")


def strongest_association(pathloss_bs_ms: np.ndarray) -> np.ndarray:
    """Each MS joins the BS with the lowest path loss (equal BS powers)."""
    return np.argmin(np.asarray(pathloss_bs_ms, dtype=float), axis=0)


def load_topology(path) -> Topology:
    text = Path(path).read_text()
    lines = []
    for i, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append((i, body.split()))
    it = iter(lines)

    def take(expect=None):
        try:
            ln, tok = next(it)
        except StopIteration:
            raise TopologyError(f"{path}: unexpected end of file") from None
        if expect is not None and tok[0] != expect:
            raise TopologyError(f"{path}:{ln}: expected '{expect}', got '{tok[0]}'")
        return ln, tok

    def read_int(key):
        ln, tok = take(key)
        try:
            return int(tok[1])
        except (IndexError, ValueError):
            raise TopologyError(f"{path}:{ln}: '{key}' needs an integer") from None

    def read_matrix(key, rows, cols):
        take(key)
        out = np.empty((rows, cols))
        for r in range(rows):
            ln, tok = take()
            if len(tok) != cols:
                raise TopologyError(f"{path}:{ln}: {key} row {r} has {len(tok)} values, want {cols}")
            try:
                out[r] = [float(v) for v in tok]
            except ValueError:
                raise TopologyError(f"{path}:{ln}: non-numeric value in {key}") from None
        return out

    ln, tok = take(TOPOLOGY_MAGIC)
    if len(tok) < 2 or tok[1] != str(TOPOLOGY_VERSION):
        raise TopologyError(f"{path}:{ln}: unsupported topology version")
    nb, nm = read_int("n_bs"), read_int("n_ms")
    if nb < 1 or nm < 1:
        raise TopologyError(f"{path}: n_bs and n_ms must be >= 1")
    bm = read_matrix("pathloss_bs_ms", nb, nm)
    mm = read_matrix("pathloss_ms_ms", nm, nm)
    bb = read_matrix("pathloss_bs_bs", nb, nb)
    assoc = None
    rest = list(it)
    if rest:
        ln, tok = rest[0]
        if tok[0] != "association" or len(rest) > 1:
            raise TopologyError(f"{path}:{ln}: unexpected content '{tok[0]}'")
        if tok[1:] != ["auto"]:
            try:
                assoc = np.array([int(v) for v in tok[1:]])
            except ValueError:
                raise TopologyError(f"{path}:{ln}: association must be integers") from None
    if assoc is None:
        assoc = strongest_association(bm)
    try:
        return Topology(bm, mm, bb, assoc)
    except TopologyError as exc:
        raise TopologyError(f"{path}: {exc}") from None


def save_topology(path, topo: Topology, comment: str = "") -> None:
    out = [f"# {ln}" for ln in comment.splitlines()]
    out += [f"{TOPOLOGY_MAGIC} {TOPOLOGY_VERSION}", f"n_bs {topo.n_bs}", f"n_ms {topo.n_ms}"]
    for key in ("pathloss_bs_ms", "pathloss_ms_ms", "pathloss_bs_bs"):
        out.append(key)
        out += [" ".join(f"{v:.6f}" for v in row) for row in getattr(topo, key)]
    out.append("association " + " ".join(str(a) for a in topo.association))
    Path(path).write_text("\n".join(out) + "\n")


@dataclass(frozen=True)
class FloorPlan:
    """Single-floor building: a row of equal rooms on either side of a corridor.

    Path loss is ``pl_1m_db + 10 n log10(d) + wall_loss_db * walls``. The
    1 m intercept sits above free space at 2.52 GHz (about 40.5 dB) to lump in
    body, furniture and antenna losses.
    """

    width_m: float = 100.0
    depth_m: float = 24.0
    room_width_m: float = 10.0
    corridor_m: float = 4.0
    pl_1m_db: float = 52.0
    exponent: float = 3.0
    wall_loss_db: float = 8.0

    def walls_between(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Interior walls crossed on the straight line between points."""
        ra = np.floor(a[..., 0] / self.room_width_m)
        rb = np.floor(b[..., 0] / self.room_width_m)
        cross_x = np.abs(ra - rb)
        half = self.depth_m / 2
        lo, hi = half - self.corridor_m / 2, half + self.corridor_m / 2

        def zone(y):
            return np.where(y < lo, 0, np.where(y > hi, 2, 1))

        cross_y = np.abs(zone(a[..., 1]) - zone(b[..., 1]))
        return cross_x + cross_y

    def pathloss_db(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d = np.maximum(np.linalg.norm(a - b, axis=-1), 1.0)
        return self.pl_1m_db + 10 * self.exponent * np.log10(d) + self.wall_loss_db * self.walls_between(a, b)


def default_bs_positions(plan: FloorPlan, n_bs: int = 5) -> np.ndarray:
    """BSs spread along the building, alternating sides of the corridor."""
    xs = (np.arange(n_bs) + 0.5) * plan.width_m / n_bs
    ys = np.where(np.arange(n_bs) % 2 == 0, plan.depth_m * 0.2, plan.depth_m * 0.8)
    return np.column_stack([xs, ys])


def generate_topology(
    seed: int,
    plan: FloorPlan = FloorPlan(),
    bs_xy: np.ndarray | None = None,
    n_ms: int | None = None,
    one_per_cell: bool = True,
    max_tries: int = 100000,
) -> Topology:
    """Log-distance plus wall-loss path losses for uniformly dropped MSs.

    With ``one_per_cell`` (the default) MS ``i`` is redrawn until its
    strongest BS is BS ``i``, so each cell holds exactly one MS.
    """
    bs_xy = default_bs_positions(plan) if bs_xy is None else np.asarray(bs_xy, float)
    nb = bs_xy.shape[0]
    nm = nb if n_ms is None else n_ms
    if one_per_cell and nm != nb:
        raise TopologyError("one_per_cell needs n_ms == n_bs")
    rng = np.random.default_rng(seed)
    ms_xy = np.empty((nm, 2))
    for i in range(nm):
        for _ in range(max_tries):
            p = rng.uniform([0, 0], [plan.width_m, plan.depth_m])
            if not one_per_cell or np.argmin(plan.pathloss_db(bs_xy, p)) == i:
                break
        else:
            raise TopologyError(f"could not place an MS in cell {i}")
        ms_xy[i] = p
    bm = plan.pathloss_db(bs_xy[:, None, :], ms_xy[None, :, :])
    mm = plan.pathloss_db(ms_xy[:, None, :], ms_xy[None, :, :])
    bb = plan.pathloss_db(bs_xy[:, None, :], bs_xy[None, :, :])
    # round so that the text file reproduces the matrices exactly
    bm, mm, bb = (np.round(m, 6) for m in (bm, mm, bb))
    np.fill_diagonal(mm, 0.0)
    np.fill_diagonal(bb, 0.0)
    return Topology(bm, mm, bb, strongest_association(bm), bs_xy, ms_xy)


@dataclass(frozen=True)
class DuplexScenario:
    name: str
    mode: DuplexMode
    total_cancellation_db: float = math.inf
    scheduling: Scheduling = Scheduling.RANDOM
    tx_power_bs_dbm: float = 23.0
    tx_power_ms_dbm: float = 23.0
    noise_dbm: float = -90.0
    bandwidth_hz: float = 20e6
    overhead_fraction: float = 0.0
    cp_efficiency: float = 1.0
    hd_band_rule: HdBandRule = HdBandRule.DL_FULL_BAND
    sinr_cap_db: float | None = None

    def __post_init__(self):
        if not self.total_cancellation_db >= 0:
            raise ValueError("total_cancellation_db must be >= 0")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be > 0")
        if not 0 <= self.overhead_fraction < 1:
            raise ValueError("overhead_fraction must be in [0, 1)")
        if not 0 < self.cp_efficiency <= 1:
            raise ValueError("cp_efficiency must be in (0, 1]")

    @property
    def si_residual_dbm(self) -> float:
        return self.tx_power_bs_dbm - self.total_cancellation_db


@dataclass
class Sinr:
    dl: np.ndarray  # per MS
    ul: np.ndarray | None  # per MS, measured at its BS; None for HD downlink-only


def compute_sinr(topo: Topology, sc: DuplexScenario) -> Sinr:
    p_bs = dbm_to_power(sc.tx_power_bs_dbm)
    p_ms = dbm_to_power(sc.tx_power_ms_dbm)
    noise = dbm_to_power(sc.noise_dbm)
    g_bm = 10 ** (-topo.pathloss_bs_ms / 10)
    g_mm = 10 ** (-topo.pathloss_ms_ms / 10)
    g_bb = 10 ** (-topo.pathloss_bs_bs / 10)
    np.fill_diagonal(g_mm, 0.0)
    np.fill_diagonal(g_bb, 0.0)
    serving = topo.association
    ms = np.arange(topo.n_ms)

    rx_dl = p_bs * g_bm  # [bs, ms]
    s_dl = rx_dl[serving, ms]
    i_bs = rx_dl.sum(axis=0) - s_dl
    fd = sc.mode is DuplexMode.FULL_DUPLEX
    i_mm = p_ms * g_mm.sum(axis=0) if fd and sc.scheduling is Scheduling.RANDOM else 0.0
    dl = s_dl / (i_bs + i_mm + noise)

    ul = None
    rx_ul = p_ms * g_bm  # [bs, ms]: power from MS at each BS
    s_ul = rx_ul[serving, ms]
    i_ms = rx_ul.sum(axis=1)[serving] - s_ul
    if fd:
        si = dbm_to_power(sc.si_residual_dbm) if math.isfinite(sc.total_cancellation_db) else 0.0
        i_bb = p_bs * g_bb.sum(axis=0)[serving]
        ul = s_ul / (i_ms + i_bb + si + noise)
    elif sc.hd_band_rule is HdBandRule.SPLIT_BAND:
        ul = s_ul / (i_ms + noise)
    return Sinr(dl, ul)


def throughput(sinr: Sinr, sc: DuplexScenario) -> np.ndarray:
    """Per-MS bit rate: ``B (1 - overhead) cp_eff log2(1 + SINR)``.

    Full duplex sums DL and UL over the whole band. Half duplex counts the
    downlink on the whole band, or DL + UL on half the band each under
    ``HdBandRule.SPLIT_BAND``.
    """
    dl = np.asarray(sinr.dl, dtype=float)
    if np.any(dl < 0) or (sinr.ul is not None and np.any(np.asarray(sinr.ul) < 0)):
        raise ValueError("SINR must be non-negative")

    def rate(s, bw):
        s = np.asarray(s, dtype=float)
        if sc.sinr_cap_db is not None:
            s = np.minimum(s, 10 ** (sc.sinr_cap_db / 10))
        return bw * (1 - sc.overhead_fraction) * sc.cp_efficiency * np.log2(1 + s)

    bw = sc.bandwidth_hz
    if sc.mode is DuplexMode.FULL_DUPLEX:
        return rate(dl, bw) + rate(sinr.ul, bw)
    if sc.hd_band_rule is HdBandRule.SPLIT_BAND:
        return rate(dl, bw / 2) + rate(sinr.ul, bw / 2)
    return rate(dl, bw)


@dataclass
class ThroughputReport:
    scenario: DuplexScenario
    dl_sinr: np.ndarray
    ul_sinr: np.ndarray | None
    throughput_bps: np.ndarray
    mean_bps: float
    median_bps: float
    p10_bps: float
    p90_bps: float
    sum_bps: float  # mean over drops of the per-drop sum rate
    cdf_x: np.ndarray
    cdf_p: np.ndarray


def _summarize(sc, dl, ul, tput, n_drops) -> ThroughputReport:
    x = np.sort(tput)
    p = np.arange(1, x.size + 1) / x.size
    return ThroughputReport(
        scenario=sc,
        dl_sinr=dl,
        ul_sinr=ul,
        throughput_bps=tput,
        mean_bps=float(np.mean(tput)),
        median_bps=float(np.percentile(tput, 50, method="inverted_cdf")),
        p10_bps=float(np.percentile(tput, 10, method="inverted_cdf")),
        p90_bps=float(np.percentile(tput, 90, method="inverted_cdf")),
        sum_bps=float(np.sum(tput) / n_drops),
        cdf_x=x,
        cdf_p=p,
    )


def report(topologies, scenarios) -> dict[str, ThroughputReport]:
    """Pool per-MS results over all topologies (drops) for each scenario.

    Percentiles use the inverted-CDF definition so they are points of the
    reported empirical CDF.
    """
    topologies = list(topologies)
    if not topologies:
        raise ValueError("need at least one topology")
    out = {}
    for sc in scenarios:
        dl, ul, tp = [], [], []
        for topo in topologies:
            s = compute_sinr(topo, sc)
            dl.append(s.dl)
            ul.append(s.ul if s.ul is not None else np.full(topo.n_ms, np.nan))
            tp.append(throughput(s, sc))
        ul_all = np.concatenate(ul)
        out[sc.name] = _summarize(
            sc,
            np.concatenate(dl),
            None if np.all(np.isnan(ul_all)) else ul_all,
            np.concatenate(tp),
            len(topologies),
        )
    return out


def random_drops(n_drops: int, seed: int, plan: FloorPlan = FloorPlan()) -> list[Topology]:
    if n_drops < 1:
        raise ValueError("n_drops must be >= 1")
    seeds = np.random.SeedSequence(seed).generate_state(n_drops)
    return [generate_topology(int(s), plan) for s in seeds]


def standard_scenarios(
    cancellation_db: dict[str, float],
    numerology=None,
    **common,
) -> list[DuplexScenario]:
    """HD baseline plus FD (random and perfect scheduling) per canceller.

    ``cancellation_db`` maps canceller names (``linear_freq``,
    ``reconstruction``, ``aux_chain``, ``precal``) to total cancellation.
    Each method's overhead comes from its RS pattern; the HD baseline uses
    the scattered cell-specific pattern.
    """
    from .cancellers import CancellerKind, pattern_for
    from .signal import FULL, overhead_ratio, scattered_cell_specific

    num = FULL if numerology is None else numerology
    out = [
        DuplexScenario(
            "hd", DuplexMode.HALF_DUPLEX_FDD,
            overhead_fraction=overhead_ratio(scattered_cell_specific(num), num),
            cp_efficiency=num.cp_efficiency, **common,
        )
    ]
    for name, canc in cancellation_db.items():
        oh = overhead_ratio(pattern_for(CancellerKind(name), num), num)
        for sched in Scheduling:
            out.append(DuplexScenario(
                f"fd_{name}_{sched.value}", DuplexMode.FULL_DUPLEX, canc, sched,
                overhead_fraction=oh, cp_efficiency=num.cp_efficiency, **common,
            ))
    return out
