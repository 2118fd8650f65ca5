import numpy as np
import pytest

from kicked_top.db.results_store import close_results_store, init_results_store
from kicked_top.dynamics.spin_algebra import CoherentStateParams, build_spin_system, coherent_state


@pytest.fixture
def spin1():
    return build_spin_system(2)


@pytest.fixture
def spin10():
    return build_spin_system(20)


@pytest.fixture
def generic_state():
    """The default initial direction used by the CLI."""
    return CoherentStateParams(np.pi / 4, np.pi / 4)


@pytest.fixture
def psi_generic(spin10, generic_state):
    return coherent_state(spin10, generic_state)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def store(tmp_path):
    out = init_results_store(str(tmp_path / "out"))
    yield out
    close_results_store()


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("KICKED_TOP_CACHE_DIR", str(tmp_path / "cache"))


def random_density(rng, dim, rank=None):
    rank = rank or dim
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)
