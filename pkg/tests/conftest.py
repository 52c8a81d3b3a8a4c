import numpy as np
import pytest

from fdsic import _kernels_py, kernels

try:
    from fdsic import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = {"python": _kernels_py}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

ACCEPTANCE_LINES = []


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    monkeypatch.setattr(kernels, "_impl", BACKENDS[request.param])
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def cgauss(rng, n, scale=1.0):
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
