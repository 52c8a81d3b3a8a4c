import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdsic import kernels
from conftest import BACKENDS, cgauss


def naive_basis(x, k_terms, l_taps):
    n = len(x)
    out = np.zeros((n, k_terms * l_taps), dtype=complex)
    for i in range(n):
        for k in range(k_terms):
            for lag in range(l_taps):
                if i - lag >= 0:
                    v = x[i - lag]
                    out[i, k * l_taps + lag] = abs(v) ** (2 * k) * v
    return out


def test_basis_matches_loop_oracle(backend, rng):
    x = cgauss(rng, 40)
    np.testing.assert_allclose(kernels.hammerstein_basis(x, 3, 4), naive_basis(x, 3, 4), rtol=1e-13)


def test_apply_equals_basis_times_coeffs(backend, rng):
    x = cgauss(rng, 300)
    c = cgauss(rng, 12).reshape(3, 4)
    y = kernels.hammerstein_apply(x, c)
    np.testing.assert_allclose(y, naive_basis(x, 3, 4) @ c.reshape(-1), rtol=1e-12, atol=1e-13)


def test_tdl_static_taps_is_convolution(backend, rng):
    x = cgauss(rng, 500)
    h = cgauss(rng, 7)
    taps = np.tile(h, (5, 1))
    y = kernels.tdl_filter(x, taps, 100)
    np.testing.assert_allclose(y, np.convolve(x, h)[:500], rtol=1e-12, atol=1e-13)


def test_tdl_block_taps_and_history(backend, rng):
    x = cgauss(rng, 60)
    hist = cgauss(rng, 3)
    taps = cgauss(rng, 3 * 4).reshape(3, 4)
    y = kernels.tdl_filter(x, taps, 20, hist)
    ext = np.concatenate([hist, x])
    for n in range(60):
        h = taps[n // 20]
        want = sum(h[j] * ext[n + 3 - j] for j in range(4))
        assert abs(y[n] - want) < 1e-12


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 64),
    k=st.integers(1, 4),
    l=st.integers(1, 6),
    seed=st.integers(0, 2**31),
)
def test_backends_agree(n, k, l, seed):
    rng = np.random.default_rng(seed)
    x = cgauss(rng, n)
    c = cgauss(rng, k * l).reshape(k, l)
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    np.testing.assert_allclose(cy.hammerstein_basis(x, k, l), py.hammerstein_basis(x, k, l), rtol=1e-13)
    np.testing.assert_allclose(cy.hammerstein_apply(x, c), py.hammerstein_apply(x, c), rtol=1e-12, atol=1e-14)
    taps = cgauss(rng, 3 * l).reshape(3, l)
    hist = cgauss(rng, l - 1)
    bl = max(1, -(-n // 3))
    np.testing.assert_allclose(
        cy.tdl_filter(x, taps, bl, hist), py.tdl_filter(x, taps, bl, hist), rtol=1e-12, atol=1e-14
    )


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
