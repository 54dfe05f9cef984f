import numpy as np
import pytest

from heislift.extend import BoundaryData, build_field
from heislift.samples import helix_values, linear_values, random_sites
from heislift.targets import Euclidean, Heisenberg
from heislift.triangulate import build_complex
from heislift.whitney import CompactSet, Decomposition, decompose


def single_cube(m: int) -> Decomposition:
    """A decomposition holding exactly the unit cube [0, 1]^m."""
    return Decomposition(
        root_lo=np.zeros(m),
        root_side=1.0,
        omega_lo=np.zeros(m),
        omega_hi=np.ones(m),
        max_generation=0,
        gen=np.zeros(1, dtype=np.int64),
        lattice=np.zeros((1, m), dtype=np.int64),
        unresolved_gen=np.zeros(0, dtype=np.int64),
        unresolved_lattice=np.zeros((0, m), dtype=np.int64),
    )


def heis_instance(seed: int, sites: int = 20, m: int = 2, max_generation: int = 8, translate=None):
    Z = CompactSet(random_sites(m, sites, seed))
    data = BoundaryData(Z, helix_values(Z.points, seed=seed, translate=translate), Heisenberg(1))
    dec = decompose(Z, -np.ones(m), np.ones(m), max_generation)
    cx = build_complex(dec)
    return build_field(dec, cx, data, 1)


def euclid_instance(seed: int, sites: int = 20, m: int = 2, d: int = 1, n: int = 1, max_generation: int = 7):
    Z = CompactSet(random_sites(m, sites, seed))
    data = BoundaryData(Z, linear_values(Z.points, d, seed=seed), Euclidean(d))
    dec = decompose(Z, -np.ones(m), np.ones(m), max_generation)
    cx = build_complex(dec)
    return build_field(dec, cx, data, n)


@pytest.fixture(scope="session")
def heis_field():
    return heis_instance(11)


@pytest.fixture(scope="session")
def euclid_field():
    return euclid_instance(12)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for k in sorted(verdicts):
            terminalreporter.write_line(verdicts[k])
