import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "conelab", max_examples=15, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("conelab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density(n, rng, rank=None, real=False):
    rank = n if rank is None else rank
    G = rng.normal(size=(n, rank))
    if not real:
        G = G + 1j * rng.normal(size=(n, rank))
    m = G @ G.conj().T
    return m / np.trace(m).real


def random_reference(n, rng, real=False):
    """Random full-rank state with an identity admixture (smallest eigenvalue >= w/n)."""
    w = rng.uniform(0.2, 0.5)
    return (1 - w) * random_density(n, rng, real=real) + w * np.eye(n) / n


# -- acceptance summary ---------------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """``record(n, passed, detail)``: print and remember one PASS/FAIL line per criterion."""
    def record(n: int, passed: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE[n] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
