from __future__ import annotations

import numpy as np
import pytest

from crystalbench.structure import Lattice, Structure

FCC = np.array([[0, 0, 0], [0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])


def rocksalt(a: float = 5.64, cation: str = "Na", anion: str = "Cl") -> Structure:
    return Structure(Lattice.cubic(a), [cation] * 4 + [anion] * 4, np.vstack([FCC, FCC + [0.5, 0, 0]]))


def zincblende(a: float = 5.64, cation: str = "Na", anion: str = "Cl") -> Structure:
    return Structure(Lattice.cubic(a), [cation] * 4 + [anion] * 4, np.vstack([FCC, FCC + 0.25]))


def nacl_primitive(a: float = 5.64) -> Structure:
    lat = Lattice(np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]]) * a / 2)
    return Structure(lat, ["Na", "Cl"], [[0, 0, 0], [0.5, 0.5, 0.5]])


def random_cell(rng: np.random.Generator, n_sites: int | None = None):
    """Cell with edges 2-15 A and angles 40-140 deg; resampled until the metric is positive definite."""
    from crystalbench.errors import DegenerateCell
    from crystalbench.structure import lattice_from_params

    while True:
        a, b, c = rng.uniform(2, 15, 3)
        al, be, ga = rng.uniform(40, 140, 3)
        try:
            lat = lattice_from_params(a, b, c, al, be, ga)
        except DegenerateCell:
            continue
        if lat.volume < 1e-3 * a * b * c:
            continue
        n = n_sites if n_sites is not None else int(rng.integers(2, 7))
        return Structure(lat, ["Si"] * n, rng.random((n, 3)))


@pytest.fixture
def nacl() -> Structure:
    return rocksalt()


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
