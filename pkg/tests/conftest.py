import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

finite = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False, allow_infinity=False)


@st.composite
def hermitian(draw, dim=None):
    d = draw(st.integers(1, 5)) if dim is None else dim
    re = np.array(draw(st.lists(finite, min_size=d * d, max_size=d * d))).reshape(d, d)
    im = np.array(draw(st.lists(finite, min_size=d * d, max_size=d * d))).reshape(d, d)
    a = re + 1j * im
    return 0.5 * (a + a.conj().T)


@st.composite
def density_matrix(draw, dim=2, pure=False):
    cols = 1 if pure else dim
    n = dim * cols
    re = np.array(draw(st.lists(finite, min_size=n, max_size=n))).reshape(dim, cols)
    im = np.array(draw(st.lists(finite, min_size=n, max_size=n))).reshape(dim, cols)
    g = re + 1j * im
    if np.linalg.norm(g) < 1e-3:
        g = np.eye(dim, cols, dtype=complex)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@st.composite
def pure_ket(draw, dim=2):
    re = np.array(draw(st.lists(finite, min_size=dim, max_size=dim)))
    im = np.array(draw(st.lists(finite, min_size=dim, max_size=dim)))
    v = re + 1j * im
    if np.linalg.norm(v) < 1e-3:
        v = np.eye(dim)[0].astype(complex)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density(rng, d=2, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
