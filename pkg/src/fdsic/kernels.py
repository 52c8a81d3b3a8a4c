"""Kernel dispatch: compiled extension when built, numpy fallback otherwise.

Set ``FDSIC_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` reports which
one is active.
"""
import os

import numpy as np

from . import _kernels_py

_impl = _kernels_py
BACKEND = "python"
if not os.environ.get("FDSIC_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass


def _c128(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def hammerstein_basis(x, k_terms, l_taps):
    """Columns ``|x[n-l]|^(2k) x[n-l]`` ordered ``k * l_taps + l``."""
    return _impl.hammerstein_basis(_c128(x), int(k_terms), int(l_taps))


def hammerstein_apply(x, coeffs):
    return _impl.hammerstein_apply(_c128(x), _c128(np.atleast_2d(coeffs)))


def tdl_filter(x, taps, block_len, history=None):
    taps = _c128(np.atleast_2d(taps))
    if history is None:
        history = np.zeros(taps.shape[1] - 1, dtype=np.complex128)
    return _impl.tdl_filter(_c128(x), taps, int(block_len), _c128(history))
