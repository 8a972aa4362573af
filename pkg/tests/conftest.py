import numpy as np
import pytest

from dagchoice.core import Bounds, ItemUniverse, Observation

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"
TOY_UTILS = np.array([-1.0, -1.5, -2.0])


def toy_universe() -> ItemUniverse:
    """Three items whose single attribute times beta=[-1] gives utilities (-1, -1.5, -2)."""
    return ItemUniverse.from_matrix([[1.0], [1.5], [2.0]], ["price"], ["s1", "s2", "s3"])


def random_universe(rng, m, k=3) -> ItemUniverse:
    return ItemUniverse.from_matrix(rng.normal(size=(m, k)))


def random_bounds(rng, m, lower_zero=False) -> Bounds:
    upper = int(rng.integers(1, m + 1))
    lower = 0 if lower_zero else int(rng.integers(0, upper + 1))
    return Bounds(lower, upper)


def random_observations(rng, m, n, bounds_pool, prefix="o"):
    """Uniformly random feasible subsets, each with a bounds pair drawn from ``bounds_pool``."""
    out = []
    for r in range(n):
        b = bounds_pool[int(rng.integers(len(bounds_pool)))]
        size = int(rng.integers(b.lower, b.upper + 1))
        items = rng.choice(m, size=size, replace=False)
        out.append(Observation.from_items(f"{prefix}{r}", b, items.tolist()))
    return out


@pytest.fixture
def toy():
    return toy_universe()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
