import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crystalbench.errors import EmptyReference, InfeasibleComposition, LengthMismatch, SchemaError, UncoveredElement
from crystalbench.hull import (
    Reference,
    ReferenceEntry,
    StabilityClass,
    StabilityThresholds,
    chemical_potentials,
    classify,
    e_above_hull,
    ensemble_stability,
    formation_energy,
    hull_energy,
    mean_std,
    read_reference_entries,
    stability_f1,
)
from crystalbench.structure import Composition
from oracles import brute_force_hull, random_candidate, random_phase_diagram

C = Composition.from_formula


def entry(eid, formula, **energies):
    return ReferenceEntry(eid, C(formula), energies)


@pytest.fixture
def ab_reference():
    return [entry("a", "Li", e=0.0), entry("b", "O", e=0.0), entry("ab", "LiO", e=-0.5)]


def test_chemical_potentials(ab_reference):
    mu = chemical_potentials(ab_reference)
    assert mu.get("e", "Li") == 0.0 and mu.get("e", "O") == 0.0
    partial = chemical_potentials([entry("a", "Li", e=0.0), entry("ab", "LiO", e=-0.5)])
    assert partial.uncovered["e"] == ("O",)
    with pytest.raises(UncoveredElement):
        partial.get("e", "O")
    two = chemical_potentials([entry("a", "Li", m1=0.1, m2=-0.3), entry("a2", "Li", m1=0.2, m2=-0.4)])
    assert two.get("m1", "Li") == 0.1 and two.get("m2", "Li") == -0.4


def test_formation_energy(ab_reference):
    mu = chemical_potentials(ab_reference)
    assert formation_energy(C("Li"), 0.0, mu, "e") == 0.0
    assert formation_energy(C("LiO"), -0.5, mu, "e") == -0.5
    mu2 = chemical_potentials([entry("a", "Li", e=0.2), entry("b", "O", e=-0.1)])
    assert formation_energy(C("LiO3"), -0.1, mu2, "e") == pytest.approx(-0.075, abs=1e-12)


def test_hull_examples(ab_reference):
    assert hull_energy(C("LiO3"), ab_reference, "e") == pytest.approx(-0.25, abs=1e-12)
    assert e_above_hull(C("LiO3"), -0.1, ab_reference, "e") == pytest.approx(0.15, abs=1e-12)
    assert e_above_hull(C("LiO"), -0.5, ab_reference, "e") == pytest.approx(0.0, abs=1e-12)
    assert e_above_hull(C("LiO"), -0.6, ab_reference, "e") == pytest.approx(-0.1, abs=1e-12)


def test_hull_errors(ab_reference):
    with pytest.raises(InfeasibleComposition):
        hull_energy(C("NaCl"), ab_reference, "e")
    with pytest.raises(EmptyReference):
        Reference([])
    with pytest.raises(SchemaError):
        ReferenceEntry("x", C("Li"), {"e": math.nan})


def test_classify_boundaries():
    assert classify(0.0) is StabilityClass.STABLE
    assert classify(-0.3) is StabilityClass.STABLE
    assert classify(0.05) is StabilityClass.METASTABLE
    assert classify(0.1) is StabilityClass.METASTABLE
    assert classify(0.1001) is StabilityClass.UNSTABLE
    assert classify(math.nan) is StabilityClass.UNEVALUABLE
    assert classify(0.15, StabilityThresholds(0.0, 0.2)) is StabilityClass.METASTABLE


def test_mean_std():
    assert mean_std([0.05, 0.15]) == pytest.approx((0.1, math.sqrt(0.005)))
    assert mean_std([-0.02]) == (-0.02, None)
    assert mean_std([]) == (None, None)


def test_ensemble_stability():
    ref = [
        entry("a", "Li", m1=0.0, m2=0.0), entry("b", "O", m1=0.0, m2=0.0),
        entry("ab", "LiO", m1=-0.5, m2=-0.5),
    ]
    # hull at LiO3 is -0.25 in both columns
    res = ensemble_stability(C("LiO3"), {"m1": -0.2, "m2": -0.1}, ref)
    assert res.e_hull == pytest.approx({"m1": 0.05, "m2": 0.15})
    assert res.e_hull_mean == pytest.approx(0.10)
    assert res.e_hull_std == pytest.approx(0.0707107, abs=1e-6)
    assert res.stability_class is StabilityClass.METASTABLE
    single = ensemble_stability(C("LiO3"), {"m1": -0.27}, ref)
    assert single.stability_class is StabilityClass.STABLE and single.e_hull_std is None
    none = ensemble_stability(C("LiO3"), {"m3": -0.2}, ref)
    assert none.stability_class is StabilityClass.UNEVALUABLE and "m3" in none.skipped


def test_stability_f1():
    assert stability_f1([0.0, 0.2], [0.0, 0.2], 0.1) == (1.0, 1.0, 1.0)
    p, r, f = stability_f1([0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5], 0.1)
    assert (p, r) == (0.5, 1.0) and f == pytest.approx(2 / 3)
    assert stability_f1([1.0], [1.0], 0.1) == (0.0, 0.0, 0.0)
    with pytest.raises(LengthMismatch):
        stability_f1([0.0], [0.0, 1.0], 0.1)


def test_reference_readers(tmp_path):
    jsonl = tmp_path / "ref.jsonl"
    jsonl.write_text(
        json.dumps({"id": "a", "formula": "Li", "energy_per_atom_m1": -1.9}) + "\n"
        + json.dumps({"id": "b", "composition": {"Li": 2, "O": 1}, "energies": {"m1": -2.5}}) + "\n"
    )
    ents = read_reference_entries(jsonl)
    assert [e.id for e in ents] == ["a", "b"] and ents[1].energy_per_atom == {"m1": -2.5}
    csvf = tmp_path / "ref.csv"
    csvf.write_text("id,formula,energy_per_atom_m1,energy_per_atom_m2\na,Li,-1.9,\nb,Li2O,-2.5,-2.4\n")
    ents = read_reference_entries(csvf)
    assert ents[0].energy_per_atom == {"m1": -1.9}
    assert ents[1].energy_per_atom == {"m1": -2.5, "m2": -2.4}
    bad = tmp_path / "bad.csv"
    bad.write_text("id,formula,energy_per_atom_m1\na,Li,abc\n")
    with pytest.raises(SchemaError):
        read_reference_entries(bad)


POOL = ["Li", "Na", "Mg", "Al", "Si", "O", "S", "Cl", "Fe", "Cu"]


def test_hull_matches_support_enumeration():
    rng = np.random.default_rng(21)
    worst = 0.0
    for _ in range(40):
        els, ents = random_phase_diagram(rng, POOL, int(rng.integers(4, 16)), int(rng.integers(2, 5)))
        cands = [random_candidate(rng, els) for _ in range(5)]
        oracle = brute_force_hull(ents, els, cands)
        ref = Reference(ents)
        for cand, want in zip(cands, oracle):
            worst = max(worst, abs(hull_energy(cand, ref, "e") - want))
    assert worst <= 1e-8


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-5, 5, allow_nan=False))
def test_hull_properties(seed, shift):
    rng = np.random.default_rng(seed)
    els, ents = random_phase_diagram(rng, POOL, 12, 3)
    ref = Reference(ents)
    for e in ents:
        # no reference entry lies below the hull
        assert e_above_hull(e.composition, e.energy_per_atom["e"], ref, "e") >= -1e-9
    cand = random_candidate(rng, els)
    e = float(rng.uniform(-2, 1))
    shifted = Reference([ReferenceEntry(x.id, x.composition, {"e": x.energy_per_atom["e"] + shift}) for x in ents])
    assert e_above_hull(cand, e + shift, shifted, "e") == pytest.approx(e_above_hull(cand, e, ref, "e"), abs=1e-9)
