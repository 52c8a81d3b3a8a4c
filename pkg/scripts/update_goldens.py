"""Regenerate tests/golden/system_gains.json from the shipped topology.

    python scripts/update_goldens.py

Only rerun after an intentional change to the system-level model; the
acceptance suite checks the stored values to 1% relative.
"""
import argparse
import json
from importlib import resources
from pathlib import Path

from fdsic.config import defaults
from fdsic.system_eval import load_topology, report, standard_scenarios

OUT = Path(__file__).resolve().parents[1] / "tests" / "golden" / "system_gains.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    points = defaults()["system"]["cancellation_db"]
    topo = load_topology(resources.files("fdsic") / "data" / "topology_5bs_5ms.txt")
    reps = report([topo], standard_scenarios(points))
    hd = reps["hd"].mean_bps
    gold = {
        "cancellation_db": points,
        "scenarios": {
            name: {
                "mean_bps": r.mean_bps,
                "sum_bps": r.sum_bps,
                "mean_gain_vs_hd": r.mean_bps / hd - 1,
                "per_ms_bps": r.throughput_bps.tolist(),
            }
            for name, r in reps.items()
        },
    }
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(gold, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
