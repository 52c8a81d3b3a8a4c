"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--n 200000] [--repeat 5]

Prints best-of-N wall time per kernel and the speedup, and checks that both
backends agree to 1e-12.
"""
import argparse
import timeit

import numpy as np

from fdsic import _kernels_py

try:
    from fdsic import _ckernels
except ImportError:
    _ckernels = None


def cases(n, rng):
    x = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    coeffs = rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))
    block = 320
    n_blocks = -(-n // block)
    taps = rng.standard_normal((n_blocks, 32)) + 1j * rng.standard_normal((n_blocks, 32))
    hist = np.zeros(31, dtype=np.complex128)
    return {
        "hammerstein_basis K=4 L=8": ("hammerstein_basis", (x, 4, 8)),
        "hammerstein_apply 4x8": ("hammerstein_apply", (x, coeffs)),
        "tdl_filter 32 taps": ("tdl_filter", (x, taps, block, hist)),
    }


def main():
    ap = argparse.ArgumentParser(description="kernel backend benchmark")
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, (fn, call_args) in cases(args.n, rng).items():
        py = getattr(_kernels_py, fn)
        t_py = min(timeit.repeat(lambda: py(*call_args), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:28s} {t_py * 1e3:10.2f} {'-':>10s} {'-':>8s}")
            continue
        cy = getattr(_ckernels, fn)
        ref, got = py(*call_args), cy(*call_args)
        err = np.max(np.abs(ref - got)) / max(np.max(np.abs(ref)), 1e-300)
        if err > 1e-12:
            raise SystemExit(f"{name}: backends disagree (rel err {err:.2e})")
        t_cy = min(timeit.repeat(lambda: cy(*call_args), number=1, repeat=args.repeat))
        print(f"{name:28s} {t_py * 1e3:10.2f} {t_cy * 1e3:10.2f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
