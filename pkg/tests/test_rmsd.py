import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_cell, rocksalt
from crystalbench.errors import SiteCountMismatch, SpeciesMismatch
from crystalbench.rmsd import RelaxPair, paired_rmsd, rmsd_ensemble
from crystalbench.structure import Lattice, Structure


def test_identity_and_lattice_shift():
    s = rocksalt()
    assert paired_rmsd(RelaxPair(s, s)) == 0.0
    shifted = Structure(s.lattice, s.species, s.frac_coords + [1, 0, -2])
    assert paired_rmsd(RelaxPair(s, shifted)) == pytest.approx(0.0, abs=1e-12)


def test_two_atom_displacement():
    before = Structure(Lattice.cubic(10), ["Na", "Cl"], [[0, 0, 0], [0.5, 0.5, 0.5]])
    after = Structure(Lattice.cubic(10), ["Na", "Cl"], [[0.02, 0, 0], [0.5, 0.5, 0.5]])
    assert paired_rmsd(RelaxPair(before, after)) == pytest.approx(math.sqrt(0.04 / 2), abs=1e-12)
    wrap = Structure(Lattice.cubic(10), ["Na", "Cl"], [[0.99, 0, 0], [0.5, 0.5, 0.5]])
    before0 = Structure(Lattice.cubic(10), ["Na", "Cl"], [[0.01, 0, 0], [0.5, 0.5, 0.5]])
    assert paired_rmsd(RelaxPair(before0, wrap)) == pytest.approx(math.sqrt(0.04 / 2), abs=1e-12)


def test_mismatch_errors():
    s = rocksalt()
    with pytest.raises(SiteCountMismatch):
        paired_rmsd(RelaxPair(s, Structure(s.lattice, ["Na"], [[0, 0, 0]])))
    swapped = Structure(s.lattice, list(reversed(s.species)), s.frac_coords)
    with pytest.raises(SpeciesMismatch):
        paired_rmsd(RelaxPair(s, swapped))


def test_ensemble():
    per = rmsd_ensemble({"a": {"m1": 0.1, "m2": 0.3}})
    assert per.per_structure["a"] == pytest.approx((0.2, 0.141421356), abs=1e-6)
    single = rmsd_ensemble({"a": {"m1": 0.05}})
    assert single.per_structure["a"] == (0.05, None)
    corpus = rmsd_ensemble({"a": [0.1], "b": [0.3]})
    assert corpus.corpus_mean == pytest.approx(0.2) and corpus.corpus_std == pytest.approx(0.141421, abs=1e-6)
    zeros = rmsd_ensemble({"a": [0.0, 0.0], "b": [0.0]})
    assert (zeros.corpus_mean, zeros.corpus_std) == (0.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), eps=st.floats(0, 0.05))
def test_small_displacements_measured_exactly(seed, eps):
    """Cartesian displacements well below half the shortest image distance are recovered exactly."""
    rng = np.random.default_rng(seed)
    s = random_cell(rng)
    disp = rng.normal(size=(len(s), 3))
    disp *= eps / np.maximum(np.linalg.norm(disp, axis=1, keepdims=True), 1e-12)
    after = Structure(s.lattice, s.species, s.frac_coords + disp @ s.lattice.inv_matrix)
    want = math.sqrt(float(np.mean(np.sum(disp**2, axis=1))))
    assert paired_rmsd(RelaxPair(s, after)) == pytest.approx(want, abs=1e-9)
