"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 configuration or input error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, kernels
from .config import coherence_seconds, config_hash, load_config
from .errors import (
    ConfigError,
    FdsicError,
    SingularFitError,
    TopologyError,
    UndeterminedSystemError,
)
from .estimation import ls_fit_hammerstein
from .io import read_capture, read_pa_coeffs, write_csv, write_pa_coeffs
from .link_eval import LinkConfig, sweep

log = logging.getLogger("fdsic")

_INPUT_ERRORS = (ConfigError, TopologyError)


def _provenance() -> str:
    here = Path(__file__).resolve().parent
    try:
        rev = subprocess.run(
            ["git", "-C", str(here), "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5, check=True,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = "unknown"
    return f"fdsic {__version__} ({rev}, kernels={kernels.BACKEND})"


def write_manifest(out: Path, command: str, cfg: dict, seeds) -> None:
    manifest = {
        "tool": "fdsic",
        "version": __version__,
        "command": command,
        "config_hash": config_hash(cfg),
        "seeds": [int(s) for s in seeds],
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "provenance": _provenance(),
        "config": cfg,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    (out / "resolved_config.yaml").write_text(yaml.safe_dump(cfg, sort_keys=True))


def _pa_model(cfg):
    path = cfg["link"]["pa_file"]
    return None if path is None else read_pa_coeffs(path)


def link_configs(cfg: dict) -> list[LinkConfig]:
    lk = cfg["link"]
    c = cfg["physics"]["speed_of_light_mps"]
    pa = _pa_model(cfg)
    seeds = [cfg["seed"] + i for i in range(lk["n_seeds"])]
    out = []
    for entry in lk["coherence"]:
        tc = coherence_seconds(entry, c)
        for name in lk["cancellers"]:
            for seed in seeds:
                tag = "static" if math.isinf(tc) else f"{tc * 1e3:.4f}ms"
                out.append(LinkConfig(
                    canceller=name,
                    profile=cfg["profile"],
                    pa=pa,
                    tx_power_dbm=lk["tx_power_dbm"],
                    noise_dbm=lk["noise_dbm"],
                    analog_sic_db=lk["analog_sic_db"],
                    coherence_time_s=tc,
                    aux_noise_dbm=lk["aux_noise_dbm"],
                    l0_backoff_db=lk["reference"]["l0_backoff_db"],
                    h0_level_db=lk["reference"]["h0_level_db"],
                    n_frames=lk["n_frames"],
                    seed=seed,
                    config_id=f"{name}@{tag}/seed{seed}",
                    **lk["channel"],
                    **lk["orders"],
                ))
    return out


def cmd_link(cfg: dict, out: Path, jobs: int) -> int:
    configs = link_configs(cfg)
    log.info("link: %d runs, %d job(s)", len(configs), jobs)
    entries = sweep(configs, jobs=jobs)
    failed = [e for e in entries.values() if e.error]
    for e in failed:
        log.error("%s: %s", e.config.config_id, e.error)
    rows, groups = [], {}
    for cfg_i in configs:
        r = entries[cfg_i.config_id].result
        if r is None:
            continue
        coh = cfg_i.coherence_ms
        for f, sf, v in zip(r.frame, r.subframe, r.cancellation_db):
            rows.append({"seed": r.seed, "frame": f, "subframe": sf, "canceller": r.canceller.value,
                         "coherence_ms": coh, "cancellation_db": v})
        groups.setdefault((r.canceller.value, coh), []).append(r)
    write_csv(out / "link_results.csv",
              ["seed", "frame", "subframe", "canceller", "coherence_ms", "cancellation_db"], rows)
    summary = []
    for (name, coh), rs in groups.items():
        mean = float(np.mean([r.mean_db for r in rs]))
        summary.append({
            "canceller": name,
            "coherence_ms": coh,
            "n_seeds": len(rs),
            "mean_db": mean,
            "median_db": float(np.median(np.concatenate(
                [r.cancellation_db[r.frame > 0] if np.any(r.frame > 0) else r.cancellation_db
                 for r in rs]))),
            "min_seed_mean_db": min(r.mean_db for r in rs),
            "max_seed_mean_db": max(r.mean_db for r in rs),
            "analog_sic_db": rs[0].analog_sic_db,
            "total_mean_db": rs[0].analog_sic_db + mean,
            "residual_evm": float(np.mean([r.residual_evm for r in rs])),
            "sim_time_s": rs[0].sim_time_s,
        })
    write_csv(out / "link_summary.csv", list(summary[0]) if summary else ["canceller"], summary)
    write_manifest(out, "link", cfg, sorted({c.seed for c in configs}))
    return 1 if failed else 0


def _cancellation_points(cfg: dict, jobs: int) -> dict[str, float]:
    sy = cfg["system"]
    if not sy["from_link_sim"]:
        return dict(sy["cancellation_db"])
    sub = json.loads(json.dumps(cfg))
    sub["link"]["coherence"] = [sy["link_coherence"]]
    sub["link"]["cancellers"] = list(sy["cancellation_db"])
    entries = sweep(link_configs(sub), jobs=jobs)
    bad = [e for e in entries.values() if e.error]
    if bad:
        raise FdsicError(f"link simulation failed: {bad[0].error}")
    points = {}
    for name in sy["cancellation_db"]:
        rs = [e.result for e in entries.values() if e.result.canceller.value == name]
        points[name] = rs[0].analog_sic_db + float(np.mean([r.mean_db for r in rs]))
    return points


def cmd_system(cfg: dict, out: Path, jobs: int) -> int:
    from importlib.resources import as_file, files

    from .signal import PROFILES
    from .system_eval import (
        HdBandRule,
        load_topology,
        random_drops,
        report,
        standard_scenarios,
    )

    sy = cfg["system"]
    if sy["topology"] is None:
        with as_file(files("fdsic") / "data" / "topology_5bs_5ms.txt") as p:
            topos = [load_topology(p)]
    else:
        if not Path(sy["topology"]).is_file():
            raise ConfigError(f"topology file not found: {sy['topology']}", "system.topology")
        topos = [load_topology(sy["topology"])]
    if sy["n_drops"]:
        topos += random_drops(sy["n_drops"], cfg["seed"])
    points = _cancellation_points(cfg, jobs)
    scenarios = standard_scenarios(
        points,
        PROFILES[cfg["profile"]],
        tx_power_bs_dbm=sy["tx_power_bs_dbm"],
        tx_power_ms_dbm=sy["tx_power_ms_dbm"],
        noise_dbm=sy["noise_dbm"],
        bandwidth_hz=sy["bandwidth_hz"],
        hd_band_rule=HdBandRule(sy["hd_band_rule"]),
        sinr_cap_db=sy["sinr_cap_db"],
    )
    reports = report(topos, scenarios)
    hd = reports["hd"]
    cdf_rows, sum_rows, ms_rows = [], [], []
    n_ms = [t.n_ms for t in topos]
    for name, r in reports.items():
        sc = r.scenario
        for x, p in zip(r.cdf_x, r.cdf_p):
            cdf_rows.append({"scenario": name, "throughput_bps": x, "cdf": p})
        sum_rows.append({
            "scenario": name,
            "mode": sc.mode.value,
            "scheduling": sc.scheduling.value if sc.mode.value == "fd" else "none",
            "total_cancellation_db": sc.total_cancellation_db if sc.mode.value == "fd" else "",
            "overhead_fraction": sc.overhead_fraction,
            "cp_efficiency": sc.cp_efficiency,
            "hd_band_rule": sc.hd_band_rule.value,
            "mean_bps": r.mean_bps,
            "median_bps": r.median_bps,
            "p10_bps": r.p10_bps,
            "p90_bps": r.p90_bps,
            "sum_rate_bps": r.sum_bps,
            "mean_gain_vs_hd": r.mean_bps / hd.mean_bps - 1,
            "sum_gain_vs_hd": r.sum_bps / hd.sum_bps - 1,
        })
        idx = 0
        for d, n in enumerate(n_ms):
            for m in range(n):
                ul = r.ul_sinr[idx] if r.ul_sinr is not None else float("nan")
                ms_rows.append({
                    "scenario": name, "drop": d, "ms": m,
                    "dl_sinr_db": 10 * np.log10(r.dl_sinr[idx]),
                    "ul_sinr_db": 10 * np.log10(ul) if ul == ul else "",
                    "throughput_bps": r.throughput_bps[idx],
                })
                idx += 1
    write_csv(out / "throughput_cdf.csv", ["scenario", "throughput_bps", "cdf"], cdf_rows)
    write_csv(out / "summary.csv", list(sum_rows[0]), sum_rows)
    write_csv(out / "per_ms.csv", list(ms_rows[0]), ms_rows)
    write_manifest(out, "system", cfg, [cfg["seed"]])
    return 0


def cmd_pa_fit(cfg: dict, out: Path, capture_in: Path, capture_out: Path) -> int:
    for p in (capture_in, capture_out):
        if not Path(p).is_file():
            raise ConfigError(f"capture not found: {p}", "capture")
    x, y = read_capture(capture_in), read_capture(capture_out)
    if len(x) != len(y):
        raise ConfigError(f"capture lengths differ: {len(x)} vs {len(y)}", "capture")
    k, l = cfg["pa_fit"]["k"], cfg["pa_fit"]["l"]
    try:
        model = ls_fit_hammerstein(x, y, k, l, skip=l - 1)
    except UndeterminedSystemError as exc:
        raise ConfigError(str(exc), "capture") from None
    except SingularFitError as exc:
        log.error("fit is singular: %s", exc)
        log.error("conditioning: dependent column %s, pivot ratio %.3g",
                  exc.label, exc.condition if exc.condition is not None else float("nan"))
        return 1
    write_pa_coeffs(out / "pa_coeffs.txt", model)
    write_manifest(out, "pa-fit", cfg, [])
    log.info("wrote %s (K=%d, L=%d)", out / "pa_coeffs.txt", k, l)
    return 0


def cmd_topology(seed: int, out: Path) -> int:
    from .system_eval import FloorPlan, generate_topology, save_topology

    out.mkdir(parents=True, exist_ok=True)
    topo = generate_topology(seed)
    save_topology(out / "topology.txt", topo, f"seed {seed}\n{FloorPlan()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fdsic", description="Full-duplex SI cancellation simulator")
    ap.add_argument("--version", action="version", version=f"fdsic {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="YAML config (defaults apply to missing keys)")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        p.add_argument("--profile", choices=["full", "reduced"], help="OFDM numerology")

    common(sub.add_parser("link", help="link-level cancellation sweep"))
    p = sub.add_parser("system", help="system-level SINR and throughput")
    common(p)
    p.add_argument("--topology", type=Path, help="topology file (overrides the config)")
    p = sub.add_parser("pa-fit", help="fit a PA model from input/output captures")
    common(p)
    p.add_argument("capture_in", type=Path)
    p.add_argument("capture_out", type=Path)
    p.add_argument("-K", type=int, dest="k", help="nonlinear branches (order 2K-1)")
    p.add_argument("-L", type=int, dest="l", help="memory taps")
    p = sub.add_parser("topology", help="generate a synthetic topology file")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="fdsic: %(levelname)s: %(message)s",
    )
    try:
        if args.command == "topology":
            return cmd_topology(args.seed, args.out)
        overrides: dict = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.profile is not None:
            overrides["profile"] = args.profile
        if args.command == "system" and args.topology is not None:
            overrides["system"] = {"topology": str(args.topology.resolve())}
        if args.command == "pa-fit":
            pf = {k: v for k, v in (("k", args.k), ("l", args.l)) if v is not None}
            if pf:
                overrides["pa_fit"] = pf
        if args.jobs < 1:
            raise ConfigError("must be >= 1", "--jobs")
        cfg = load_config(args.config, overrides)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "link":
            return cmd_link(cfg, args.out, args.jobs)
        if args.command == "system":
            return cmd_system(cfg, args.out, args.jobs)
        return cmd_pa_fit(cfg, args.out, args.capture_in, args.capture_out)
    except _INPUT_ERRORS as exc:
        print(f"fdsic: error: {exc}", file=sys.stderr)
        return 2
    except FdsicError as exc:
        print(f"fdsic: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
