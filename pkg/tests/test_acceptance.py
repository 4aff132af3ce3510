"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances and timing budgets are the pinned targets; they are not relaxed to
make a run green.
"""

from __future__ import annotations

import math
import os
import time

import numpy as np

from acceptance_log import record
from conftest import rocksalt
from crystalbench.config import RunConfig
from crystalbench.errors import DegenerateCell
from crystalbench.fingerprint import fingerprint
from crystalbench.funnel import ReferenceIndex, sun_rates, uniqueness_from_keys
from crystalbench.hhi import HhiConfig, HhiTable, RiskCategory, combined_hhi, compound_hhi, risk_category
from crystalbench.hull import (
    Reference,
    ReferenceEntry,
    StabilityClass,
    StabilityResult,
    classify,
    e_above_hull,
    hull_energy,
)
from crystalbench.pipeline import run
from crystalbench.report import emit_markdown, markdown_row, to_json
from crystalbench.rmsd import RelaxPair, paired_rmsd, rmsd_ensemble
from crystalbench.stats import frechet_distance, frechet_from_moments, js_distance, mmd, shannon_entropy, vendi
from crystalbench.structure import Composition, Lattice, Structure, lattice_from_params, min_interatomic_distance
from crystalbench.synthetic import bundled_mini_config, scale_corpus
from crystalbench.validity import Stage, check_charge_neutrality
from oracles import brute_force_hull, min_image_oracle, random_candidate, random_phase_diagram

C = Composition.from_formula
POOL = ["Li", "Na", "Mg", "Al", "Si", "O", "S", "Cl", "Fe", "Cu", "Zn", "Ti"]


def test_criterion_01_stability_thresholds():
    cases = [(0.0, StabilityClass.STABLE), (0.05, StabilityClass.METASTABLE),
             (0.1, StabilityClass.METASTABLE), (0.1001, StabilityClass.UNSTABLE)]
    t0 = time.perf_counter()
    got = [classify(e) for e, _ in cases]
    dt = time.perf_counter() - t0
    ok = got == [c for _, c in cases] and dt < 1e-3
    record(1, ok, f"classes {[g.value for g in got]}, {dt * 1e6:.1f} us")
    assert ok


def test_criterion_02_hull_lp_vs_support_oracle():
    rng = np.random.default_rng(2)
    worst, t0 = 0.0, time.perf_counter()
    for _ in range(200):
        n_el = int(rng.integers(2, 5))
        els, entries = random_phase_diagram(rng, POOL, int(rng.integers(n_el, 26)), n_el)
        ref = Reference(entries)
        cands = [random_candidate(rng, els) for _ in range(10)]
        oracle = brute_force_hull(entries, els, cands)
        for cand, want in zip(cands, oracle):
            worst = max(worst, abs(hull_energy(cand, ref, "e") - want))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 10.0
    record(2, ok, f"max |dE| = {worst:.2e} eV/atom over 2000 candidates, {dt:.2f} s (incl. oracle)")
    assert ok


def test_criterion_03_reference_shift_cancels():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        els, entries = random_phase_diagram(rng, POOL, 12, 3)
        entries = [ReferenceEntry(e.id, e.composition, {"a": e.energy_per_atom["e"],
                                                        "b": e.energy_per_atom["e"] + rng.normal(0, 0.1)})
                   for e in entries]
        cand, e_cand = random_candidate(rng, els), float(rng.uniform(-2, 1))
        base = e_above_hull(cand, e_cand, Reference(entries), "a")
        for shift in (-3.0, 0.7):
            moved = [ReferenceEntry(e.id, e.composition, {"a": e.energy_per_atom["a"] + shift,
                                                          "b": e.energy_per_atom["b"]})
                     for e in entries]
            worst = max(worst, abs(e_above_hull(cand, e_cand + shift, Reference(moved), "a") - base))
    ok = worst < 1e-9
    record(3, ok, f"max E_hull change under c in {{-3, 0.7}}: {worst:.2e} eV/atom")
    assert ok


def test_criterion_04_charge_corpus():
    corpus = [("NaCl", Stage.STANDARD), ("MgO", Stage.STANDARD), ("Al2O3", Stage.STANDARD),
              ("TiO2", Stage.STANDARD), ("SrTiO3", Stage.STANDARD), ("Fe2O3", Stage.STANDARD),
              ("Fe3O4", Stage.DATA_DRIVEN), ("Cu", Stage.METALLIC), ("CuZn", Stage.METALLIC),
              ("Na2Cl", None)]
    t0 = time.perf_counter()
    verdicts = []
    for formula, stage in corpus:
        ok, a = check_charge_neutrality(C(formula))
        verdicts.append((not ok and a is None) if stage is None else (ok and a.stage is stage))
    dt = time.perf_counter() - t0
    ok = all(verdicts) and dt < 1.0
    record(4, ok, f"{sum(verdicts)}/10 exact verdicts, {dt * 1e3:.1f} ms")
    assert ok


def _raw_random_cell(rng):
    # edges 2-15 A, angles 40-140 deg; only cells without a real metric are redrawn
    while True:
        a, b, c = rng.uniform(2, 15, 3)
        al, be, ga = rng.uniform(40, 140, 3)
        try:
            lat = lattice_from_params(a, b, c, al, be, ga)
        except DegenerateCell:
            continue
        n = int(rng.integers(2, 7))
        return Structure(lat, ["Si"] * n, rng.random((n, 3)))


def test_criterion_05_min_image_vs_supercell_oracle():
    rng = np.random.default_rng(0)
    cells = [_raw_random_cell(rng) for _ in range(1000)]
    t0 = time.perf_counter()
    ours = [min_interatomic_distance(s) for s in cells]
    dt = time.perf_counter() - t0
    oracle = [min_image_oracle(s, 3) for s in cells]
    bad = [k for k, (x, y) in enumerate(zip(ours, oracle)) if abs(x - y) > 1e-9]
    detail = f"{1000 - len(bad)}/1000 agree with the {{-3..3}}^3 oracle, {dt:.2f} s"
    for k in bad:
        wide = min_image_oracle(cells[k], 6)
        detail += (f"; cell {k} (V={cells[k].lattice.volume:.2f} A^3): ours {ours[k]:.10f},"
                   f" oracle {oracle[k]:.10f}, {{-6..6}}^3 scan {wide:.10f}")
    ok = not bad and dt < 5.0
    record(5, ok, detail)
    assert ok


def test_criterion_06_uniqueness_scores():
    ok = True
    for n in (2, 5, 10):
        r = uniqueness_from_keys(["x"] * n)
        ok &= all(u == 1 / n for u in r.scores) and r.mean_score == 1 / n
    mixed = uniqueness_from_keys(["A", "A", "B"])
    ok &= mixed.unique_fraction == 2 / 3
    record(6, ok, f"u_i = 1/n for n in {{2,5,10}}; {{A,A,B}} unique fraction {mixed.unique_fraction:.6f}")
    assert ok


CATIONS = ["Li", "Na", "K", "Rb", "Cs", "Ag", "Cu", "Tl", "In", "Au", "Ga", "Hg", "Pb", "Sn"]


def test_criterion_07_hand_funnel():
    # distinct formulas give distinct keys: A..N
    proto = {k: rocksalt(5.0 + 0.05 * i, cation, "Cl") for i, (k, cation) in enumerate(zip("ABCDEFGHIJKLMN", CATIONS))}
    plan = (
        [("A", 0.0), ("A", -0.02), ("B", -0.1), ("C", 0.0), ("D", -0.3)]          # stable; C known
        + [("E", 0.01), ("E", 0.05), ("E", 0.1), ("F", 0.02), ("G", 0.03), ("H", 0.09)]  # metastable; G, H known
        + [("I", 0.2), ("J", 0.5), ("K", 0.1001), ("L", 1.0)]                      # unstable
        + [("M", None), ("N", None)]                                               # no usable energy
        + [("A", "invalid"), ("B", "invalid"), ("I", "invalid")]
    )
    structures, stability = [], []
    for key, e in plan:
        structures.append(proto[key])
        if e == "invalid":
            stability.append(None)
        else:
            stability.append(StabilityResult(e_hull_mean=e))
    ref = ReferenceIndex(fingerprint(proto[k]).value for k in "CGH")
    res = sun_rates(structures, stability, ref, novelty_method="fingerprint")
    want = {"valid": 85.0, "unique": 70.0, "novel": 55.0, "stable": 25.0, "unique_stable": 20.0,
            "sun": 15.0, "metastable": 30.0, "unique_metastable": 20.0, "msun": 10.0}
    row = markdown_row({"model": {"name": "hand"}, "funnel": res.to_dict()})
    table = emit_markdown({"model": {"name": "hand"}, "funnel": res.to_dict()})
    ok = (res.n_submitted == 20 and res.rates == want and res.chain_holds()
          and row[8] == "15.0 (3)" and row[10] == "10.0 (2)"
          and "| 15.0 (3) |" in table and "| 10.0 (2) |" in table)
    record(7, ok, f"rates {res.rates}; SUN cell {row[8]!r}, MSUN cell {row[10]!r}; chain {res.chain_holds()}")
    assert ok


def test_criterion_08_distribution_metrics():
    rng = np.random.default_rng(8)
    P = rng.random(12)
    X = rng.normal(size=(60, 5))
    S = np.cov(rng.normal(size=(40, 3)), rowvar=False)
    d = np.array([0.3, -1.2, 2.0])
    checks = {
        "JS(P,P)": abs(js_distance(P, P)) <= 1e-12,
        "JS disjoint": abs(js_distance([1, 1, 0, 0], [0, 0, 2, 3]) - 1.0) <= 1e-12,
        "MMD(X,X)": mmd(X, X) <= 1e-12,
        "FD identical": frechet_distance(X, X) <= 1e-9,
        "FD mean shift": abs(frechet_from_moments(np.zeros(3), S, d, S) - float(d @ d)) <= 1e-9,
        "FD 1-D": abs(frechet_from_moments([0.0], [[1.0]], [1.0], [[4.0]]) - 2.0) <= 1e-9,
    }
    ok = all(checks.values())
    record(8, ok, ", ".join(f"{k} {'ok' if v else 'off'}" for k, v in checks.items()))
    assert ok


def test_criterion_09_diversity_entropy():
    worst = 0.0
    for k in (2, 4, 16):
        counts = [7] * k
        worst = max(worst, abs(shannon_entropy(counts) - math.log(k)), abs(vendi(counts) - k))
    single = (shannon_entropy([9]), vendi([9]))
    ok = worst <= 1e-12 and single == (0.0, 1.0)
    record(9, ok, f"max deviation {worst:.1e}; single category -> {single}")
    assert ok


def test_criterion_10_hhi():
    table = HhiTable({"Fe": 1600, "O": 500, "Nb": 8500}, {"Fe": 2800, "O": 500, "Nb": 8800})
    cfg = HhiConfig()
    rows = [  # composition, production, reserve (scaled)
        ("Fe", 1.6, 2.8), ("Fe2O3", 0.4 * 1.6 + 0.6 * 0.5, 0.4 * 2.8 + 0.6 * 0.5), ("NbO", 4.5, 4.65),
    ]
    ok = cfg.w_prod == 0.25 and cfg.w_res == 0.75
    for formula, p, r in rows:
        comp = C(formula)
        ok &= math.isclose(compound_hhi(comp, table, "production"), p, abs_tol=1e-12)
        ok &= math.isclose(compound_hhi(comp, table, "reserve"), r, abs_tol=1e-12)
        ok &= math.isclose(combined_hhi(comp, table), 0.25 * p + 0.75 * r, abs_tol=1e-12)
    bounds = [(0.0, RiskCategory.LOW), (2.0, RiskCategory.LOW), (2.0001, RiskCategory.MODERATE),
              (5.0, RiskCategory.MODERATE), (5.0001, RiskCategory.HIGH), (10.0, RiskCategory.HIGH)]
    ok &= all(risk_category(x) is cat for x, cat in bounds)
    missing = compound_hhi(C("Xe"), table)
    ok &= missing == 10.0
    record(10, ok, f"weights {cfg.w_prod}/{cfg.w_res}, boundaries checked, missing element -> {missing}")
    assert ok


def test_criterion_11_rmsd():
    s = rocksalt()
    identity = paired_rmsd(RelaxPair(s, s))
    shifted = paired_rmsd(RelaxPair(s, Structure(s.lattice, s.species, s.frac_coords + [1, -1, 2])))
    before = Structure(Lattice.cubic(10), ["Na", "Cl"], [[0, 0, 0], [0.5, 0.5, 0.5]])
    after = Structure(Lattice.cubic(10), ["Na", "Cl"], [[0.02, 0, 0], [0.5, 0.5, 0.5]])
    two_atom = paired_rmsd(RelaxPair(before, after))
    ens = rmsd_ensemble({"a": [0.1], "b": [0.3]})
    ok = (identity == 0.0 and shifted <= 1e-12 and abs(two_atom - 0.141421) <= 1e-6
          and abs(ens.corpus_mean - 0.2) <= 1e-6 and abs(ens.corpus_std - 0.141421) <= 1e-6)
    record(11, ok, f"identity {identity}, lattice shift {shifted:.1e}, two-atom {two_atom:.6f},"
                   f" ensemble {ens.corpus_mean:.6f} +/- {ens.corpus_std:.6f}")
    assert ok


def test_criterion_12_determinism():
    cfg = RunConfig.load(bundled_mini_config())
    outputs = []
    for threads in (1, 1, 8):
        rep = run(cfg.override(threads=threads))
        outputs.append((to_json(rep), emit_markdown(rep)))
    ok = outputs[0] == outputs[1] == outputs[2]
    record(12, ok, f"JSON {len(outputs[0][0])} bytes, markdown {len(outputs[0][1])} bytes;"
                   f" identical across runs and threads 1 vs 8: {ok}")
    assert ok


def test_criterion_13_performance(tmp_path):
    paths = scale_corpus(tmp_path, 10_000, 100_000, seed=0)
    cfg = RunConfig.load(paths["config.json"]).override(threads=min(8, os.cpu_count() or 1))
    t0 = time.perf_counter()
    rep = run(cfg)
    dt = time.perf_counter() - t0
    ok = rep["funnel"]["n_submitted"] == 10_000 and dt < 60.0
    record(13, ok, f"10,000 candidates vs 100,000 reference entries in {dt:.1f} s"
                   f" on {cfg.threads} workers (corpus generation excluded)")
    assert ok
