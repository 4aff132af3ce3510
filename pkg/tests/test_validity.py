import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rocksalt
from crystalbench.errors import EnumerationBudgetExceeded, UndefinedCorrelation
from crystalbench.structure import Composition, Lattice, Structure
from crystalbench.validity import (
    ChargeAssignment,
    OxidationStateTable,
    Stage,
    ValidityConfig,
    ValidityReport,
    check_charge_neutrality,
    check_density,
    check_lattice,
    check_min_distance,
    check_symmetry_determinable,
    electronegativity_correlation,
    enumerate_balanced_assignments,
    load_oxidation_table,
    metallicity_path,
    score_assignment,
    validity_rate,
    validity_report,
)


def cubic_one(a: float, el: str = "Na") -> Structure:
    return Structure(Lattice.cubic(a), [el], [[0, 0, 0]])


def test_lattice_bounds():
    assert check_lattice(cubic_one(4))
    assert not check_lattice(cubic_one(0.5))
    assert not check_lattice(cubic_one(150))
    flat = Structure(Lattice([[1, 0, 0], [2, 0, 0], [0, 0, 1]], validate=False), ["Na"], [[0, 0, 0]])
    assert not check_lattice(flat)


def test_density_and_distance_bounds():
    assert not check_density(Structure(Lattice.cubic(100), ["H"], [[0, 0, 0]]))
    pair = Structure(Lattice.cubic(10), ["Na", "Na"], [[0, 0, 0], [0.05, 0, 0]])
    assert not check_min_distance(pair)
    s = rocksalt()
    assert check_lattice(s) and check_density(s) and check_min_distance(s)


def test_symmetry_determinable():
    assert check_symmetry_determinable(rocksalt().with_meta(spacegroup_number=225))
    assert check_symmetry_determinable(rocksalt())
    flat = Structure(Lattice([[1, 0, 0], [2, 0, 0], [0, 0, 1]], validate=False), ["Na"], [[0, 0, 0]])
    assert not check_symmetry_determinable(flat)


def test_metallicity():
    assert metallicity_path(Composition({"Cu": 1}))
    assert metallicity_path(Composition({"Cu": 1, "Zn": 1}))
    assert not metallicity_path(Composition({"Na": 1, "Cl": 1}))


def test_enumeration_examples():
    nacl = enumerate_balanced_assignments(Composition({"Na": 1, "Cl": 1}), {"Na": [1], "Cl": [-1]})
    assert [a.states for a in nacl] == [(1, -1)]
    fe3o4 = enumerate_balanced_assignments(Composition({"Fe": 3, "O": 4}), {"Fe": [2, 3], "O": [-2]})
    assert len(fe3o4) == 1
    fe = [q for el, q in zip(fe3o4[0].species, fe3o4[0].states) if el == "Fe"]
    assert sorted(fe) == [2, 3, 3]
    assert enumerate_balanced_assignments(Composition({"Na": 2, "Cl": 1}), {"Na": [1], "Cl": [-1]}) == []


def test_enumeration_budget():
    comp = Composition({"Fe": 40, "Mn": 40, "O": 150})
    with pytest.raises(EnumerationBudgetExceeded):
        enumerate_balanced_assignments(comp, {"Fe": [2, 3, 4, 6], "Mn": [2, 3, 4, 7], "O": [-2, -1]}, cap=100)


def brute_force_assignments(counts, states):
    """Multisets of states per element whose total is zero."""
    per_el = [list(itertools.combinations_with_replacement(sorted(states[el]), n)) for el, n in counts]
    out = set()
    for combo in itertools.product(*per_el):
        if sum(sum(c) for c in combo) == 0:
            out.add(tuple(q for c in combo for q in c))
    return out


@settings(max_examples=60, deadline=None)
@given(
    n1=st.integers(1, 4),
    n2=st.integers(1, 4),
    s1=st.sets(st.integers(1, 5), min_size=1, max_size=3),
    s2=st.sets(st.integers(-4, -1), min_size=1, max_size=2),
)
def test_enumeration_matches_brute_force(n1, n2, s1, s2):
    comp = Composition({"Fe": n1, "O": n2})
    states = {"Fe": sorted(s1), "O": sorted(s2)}
    got = enumerate_balanced_assignments(comp, states)
    assert all(a.total_charge == 0 for a in got)
    assert [a.states for a in got] == sorted(a.states for a in got)
    got_multisets = {tuple(sorted(a.states[:n1])) + tuple(sorted(a.states[n1:])) for a in got}
    assert got_multisets == brute_force_assignments([("Fe", n1), ("O", n2)], states)


def test_score():
    table = OxidationStateTable({"A": ((1, 0.9),), "B": ((-1, 0.4),)}, {}, {})
    one = OxidationStateTable({"A": ((1, 1.0),), "B": ((-1, 1.0),)}, {}, {})
    a = ChargeAssignment(("A", "B"), (1, -1))
    assert score_assignment(a, one) == 1.0
    assert score_assignment(a, table) == pytest.approx(0.6, abs=1e-12)


def test_electronegativity_correlation():
    table = OxidationStateTable({}, {}, {"Na": 0.93, "Cl": 3.16})
    assert electronegativity_correlation(ChargeAssignment(("Na", "Cl"), (1, -1)), table) == pytest.approx(-1.0)
    assert electronegativity_correlation(ChargeAssignment(("Na", "Cl"), (-1, 1)), table) == pytest.approx(1.0)
    with pytest.raises(UndefinedCorrelation):
        electronegativity_correlation(ChargeAssignment(("Cu",), (0,)), table)


@pytest.mark.parametrize(
    "formula, stage",
    [
        ("NaCl", Stage.STANDARD), ("MgO", Stage.STANDARD), ("Al2O3", Stage.STANDARD),
        ("TiO2", Stage.STANDARD), ("SrTiO3", Stage.STANDARD), ("Fe2O3", Stage.STANDARD),
        ("Fe3O4", Stage.DATA_DRIVEN), ("Cu", Stage.METALLIC), ("CuZn", Stage.METALLIC),
    ],
)
def test_charge_corpus_accepted(formula, stage):
    ok, a = check_charge_neutrality(Composition.from_formula(formula))
    assert ok and a.stage is stage
    assert a.total_charge == 0


@pytest.mark.parametrize("formula", ["Na2Cl", "NaCl2"])
def test_charge_corpus_rejected(formula):
    ok, a = check_charge_neutrality(Composition.from_formula(formula))
    assert not ok and a is None


def test_charge_uses_reduced_composition():
    ok, a = check_charge_neutrality(rocksalt())
    assert ok and a.states == (1, -1)


def test_partial_occupancy_rejected():
    s = Structure(Lattice.cubic(4), ["Na", "Cl"], [[0, 0, 0], [0.5, 0.5, 0.5]], occupancy=[0.5, 1.0])
    assert check_charge_neutrality(s) == (False, None)


def test_report_and_rate():
    rep = validity_report(rocksalt())
    assert rep.overall and rep.failure_reasons == []
    bad = validity_report(None)
    assert not bad.overall and bad.failure_reasons == ["readable"]
    reports = [rep, rep, rep, bad]
    assert validity_rate(reports) == 75.0
    assert validity_rate([]) == 0.0


def test_report_overall_is_conjunction():
    rep = ValidityReport(**{name: True for name in ValidityReport.CHECKS})
    assert rep.overall
    rep.density = False
    assert not rep.overall


def test_bundled_table_loads():
    table = load_oxidation_table()
    assert table.probability("O", -2) > 0.9
    assert math.isclose(sum(p for _, p in table.common["Fe"]), 1.0)
    assert set(table.common_states()["Fe"]) <= set(table.historical_states()["Fe"])


def test_config_rejects_empty_interval():
    with pytest.raises(ValueError):
        ValidityConfig(edge_range=(5.0, 1.0))
