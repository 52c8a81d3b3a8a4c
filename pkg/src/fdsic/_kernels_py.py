"""Pure-numpy implementations of the sample-rate kernels.

These are the reference versions; ``_ckernels.pyx`` must agree with them to
floating-point rounding.
"""
import numpy as np


def _delayed(x, lag):
    if lag == 0:
        return x
    out = np.zeros_like(x)
    if lag < x.shape[0]:
        out[lag:] = x[:-lag]
    return out


def hammerstein_basis(x, k_terms, l_taps):
    n = x.shape[0]
    out = np.empty((n, k_terms * l_taps), dtype=np.complex128)
    for lag in range(l_taps):
        xd = _delayed(x, lag)
        mag2 = xd.real**2 + xd.imag**2
        branch = xd.copy()
        for k in range(k_terms):
            out[:, k * l_taps + lag] = branch
            branch = branch * mag2
    return out


def hammerstein_apply(x, coeffs):
    k_terms, l_taps = coeffs.shape
    y = np.zeros(x.shape[0], dtype=np.complex128)
    for lag in range(l_taps):
        xd = _delayed(x, lag)
        mag2 = xd.real**2 + xd.imag**2
        # Horner in |x|^2
        acc = np.full(x.shape[0], coeffs[k_terms - 1, lag], dtype=np.complex128)
        for k in range(k_terms - 2, -1, -1):
            acc = acc * mag2 + coeffs[k, lag]
        y += acc * xd
    return y


def tdl_filter(x, taps, block_len, history):
    """Block-wise time-varying FIR: block ``b`` of ``x`` uses ``taps[b]``.

    ``history`` holds the ``L - 1`` input samples preceding ``x`` (oldest
    first).
    """
    n = x.shape[0]
    n_blocks, l_taps = taps.shape
    if history.shape[0] < l_taps - 1:
        history = np.concatenate(
            [np.zeros(l_taps - 1 - history.shape[0], dtype=np.complex128), history]
        )
    ext = np.concatenate([history, x])
    pad = history.shape[0]
    block_idx = np.minimum(np.arange(n) // block_len, n_blocks - 1)
    y = np.zeros(n, dtype=np.complex128)
    for lag in range(l_taps):
        y += taps[block_idx, lag] * ext[pad - lag : pad - lag + n]
    return y
