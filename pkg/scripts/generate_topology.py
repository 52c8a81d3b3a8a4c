"""Regenerate the shipped 5-BS/5-MS topology file.

    python scripts/generate_topology.py [--seed 0] [--out src/fdsic/data/topology_5bs_5ms.txt]
"""
import argparse
from pathlib import Path

from fdsic.system_eval import FloorPlan, generate_topology, save_topology

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "fdsic" / "data" / "topology_5bs_5ms.txt"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args()
    plan = FloorPlan()
    topo = generate_topology(args.seed, plan)
    comment = (
        f"Synthetic indoor floor, 5 BSs / 5 MSs (one MS per cell), seed {args.seed}.\n"
        f"{plan}\n"
        "Path losses in dB; generated by scripts/generate_topology.py."
    )
    save_topology(args.out, topo, comment)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
