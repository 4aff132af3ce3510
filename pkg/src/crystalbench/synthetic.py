"""Deterministic synthetic corpora built from textbook prototypes.

Used for the bundled mini corpus, the determinism harness and the performance
smoke run. Energies follow a simple model: elemental chemical potentials per
energy column plus a per-formula formation depth, with each column offset by a
constant so that per-column hulls matter.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import elements
from .hull import Reference, ReferenceEntry, hull_energy
from .structure import Composition, Lattice, Structure, lattice_from_params

COLUMNS = ("m1", "m2")
COLUMN_SHIFT = {"m1": 0.0, "m2": 0.25}

_FCC = np.array([[0, 0, 0], [0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])


def _r(el: str) -> float:
    return elements.element(el).covalent_radius


def prototype(kind: str, species: tuple[str, ...], scale: float = 1.0) -> Structure:
    """Build a prototype structure; lattice constants follow covalent radii."""
    if kind == "fcc":
        (a_el,) = species
        a = 2 * math.sqrt(2) * _r(a_el) * scale
        return Structure(Lattice.cubic(a), [a_el] * 4, _FCC)
    if kind == "bcc":
        (a_el,) = species
        a = 4 * _r(a_el) / math.sqrt(3) * scale
        return Structure(Lattice.cubic(a), [a_el] * 2, [[0, 0, 0], [0.5, 0.5, 0.5]])
    if kind == "rocksalt":
        a_el, b_el = species
        a = 2 * (_r(a_el) + _r(b_el)) * scale
        return Structure(Lattice.cubic(a), [a_el] * 4 + [b_el] * 4, np.vstack([_FCC, _FCC + [0.5, 0, 0]]))
    if kind == "cscl":
        a_el, b_el = species
        a = 2 * (_r(a_el) + _r(b_el)) / math.sqrt(3) * scale
        return Structure(Lattice.cubic(a), [a_el, b_el], [[0, 0, 0], [0.5, 0.5, 0.5]])
    if kind == "zincblende":
        a_el, b_el = species
        a = 4 * (_r(a_el) + _r(b_el)) / math.sqrt(3) * scale
        return Structure(Lattice.cubic(a), [a_el] * 4 + [b_el] * 4, np.vstack([_FCC, _FCC + 0.25]))
    if kind == "fluorite":
        a_el, b_el = species
        a = 4 * (_r(a_el) + _r(b_el)) / math.sqrt(3) * scale
        return Structure(
            Lattice.cubic(a), [a_el] * 4 + [b_el] * 8, np.vstack([_FCC, _FCC + 0.25, _FCC + 0.75])
        )
    if kind == "perovskite":
        a_el, b_el, x_el = species
        a = 2 * (_r(b_el) + _r(x_el)) * scale
        frac = [[0, 0, 0], [0.5, 0.5, 0.5], [0.5, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0.5]]
        return Structure(Lattice.cubic(a), [a_el, b_el, x_el, x_el, x_el], frac)
    if kind == "rutile":
        a_el, b_el = species
        u = 0.305
        a = (_r(a_el) + _r(b_el)) / (u * math.sqrt(2)) * scale
        lat = lattice_from_params(a, a, 0.644 * a, 90, 90, 90)
        frac = [[0, 0, 0], [0.5, 0.5, 0.5], [u, u, 0], [1 - u, 1 - u, 0], [0.5 + u, 0.5 - u, 0.5], [0.5 - u, 0.5 + u, 0.5]]
        return Structure(lat, [a_el, a_el] + [b_el] * 4, frac)
    raise ValueError(f"unknown prototype {kind!r}")


CHEMISTRIES: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("rocksalt", ("Na", "Cl")), ("rocksalt", ("K", "Cl")), ("rocksalt", ("Li", "F")),
    ("rocksalt", ("Mg", "O")), ("rocksalt", ("Ca", "O")), ("rocksalt", ("Ni", "O")),
    ("rocksalt", ("Na", "F")), ("rocksalt", ("K", "Br")), ("rocksalt", ("Sr", "O")),
    ("rocksalt", ("Ba", "O")),
    ("cscl", ("Cs", "Cl")), ("cscl", ("Cs", "Br")), ("cscl", ("Cu", "Zn")),
    ("cscl", ("Ni", "Al")), ("cscl", ("Fe", "Al")),
    ("zincblende", ("Zn", "S")), ("zincblende", ("Ga", "As")), ("zincblende", ("Cd", "Te")),
    ("zincblende", ("Zn", "Se")), ("zincblende", ("In", "P")),
    ("fluorite", ("Ca", "F")), ("fluorite", ("Sr", "F")), ("fluorite", ("Ba", "F")),
    ("fluorite", ("Ce", "O")), ("fluorite", ("Zr", "O")),
    ("perovskite", ("Sr", "Ti", "O")), ("perovskite", ("Ba", "Ti", "O")),
    ("perovskite", ("Ca", "Ti", "O")), ("perovskite", ("K", "Nb", "O")),
    ("perovskite", ("La", "Al", "O")),
    ("rutile", ("Ti", "O")), ("rutile", ("Sn", "O")), ("rutile", ("Mn", "O")),
    ("fcc", ("Cu",)), ("fcc", ("Al",)), ("fcc", ("Ni",)), ("fcc", ("Ag",)), ("fcc", ("Au",)),
    ("bcc", ("Fe",)), ("bcc", ("Cr",)), ("bcc", ("W",)), ("bcc", ("Mo",)), ("bcc", ("V",)),
)


def _element_pool() -> list[str]:
    return sorted({el for _, sp in CHEMISTRIES for el in sp}, key=elements.electronegativity_key)


def _elemental_structure(el: str) -> Structure:
    data = elements.element(el)
    return prototype("bcc" if data.is_metal else "fcc", (el,), 1.0)


class EnergyModel:
    """mu per (column, element) and formation depth per reduced formula, all seeded."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._mu: dict[tuple[str, str], float] = {}
        self._depth: dict[str, float] = {}

    @staticmethod
    def _stable_seed(seed: int, text: str) -> int:
        # FNV-1a; the builtin hash() is salted per process
        h = 1469598103934665603
        for ch in f"{seed}:{text}".encode():
            h = ((h ^ ch) * 1099511628211) % (1 << 64)
        return h

    def mu(self, column: str, el: str) -> float:
        key = (column, el)
        if key not in self._mu:
            rng = np.random.default_rng(self._stable_seed(self.seed, f"mu:{el}"))
            base = -1.0 - 4.0 * rng.random()
            self._mu[key] = base + COLUMN_SHIFT[column]
        return self._mu[key]

    def depth(self, formula: str) -> float:
        if formula not in self._depth:
            rng = np.random.default_rng(self._stable_seed(self.seed, f"depth:{formula}"))
            self._depth[formula] = -1.5 * rng.random()
        return self._depth[formula]

    def energy(self, comp: Composition, column: str, extra: float = 0.0) -> float:
        base = math.fsum(x * self.mu(column, el) for el, x in comp.fractions().items())
        if len(comp) == 1:
            return base + extra
        col_noise = 0.02 * (np.random.default_rng(
            self._stable_seed(self.seed, f"noise:{column}:{comp.reduced_formula}")
        ).random() - 0.5)
        return base + self.depth(comp.reduced_formula) + col_noise + extra


def _jitter(s: Structure, rng: np.random.Generator, sigma: float) -> Structure:
    return Structure(s.lattice, s.species, s.frac_coords + rng.normal(0, sigma, s.frac_coords.shape), meta=dict(s.meta))


@dataclass
class Corpus:
    candidates: list[dict]  # JSONL records; a record may be a raw string (unreadable line)
    reference: list[dict]
    energies: list[dict]
    embeddings: list[dict]
    reference_embeddings: list[dict]
    relaxed: list[dict]


def mini_corpus(seed: int = 0, n_candidates: int = 50, n_reference: int = 200) -> Corpus:
    """Small corpus with a structure-bearing reference and a mixed candidate set."""
    rng = np.random.default_rng(seed)
    model = EnergyModel(seed)
    pool = _element_pool()
    held_out = set(range(len(CHEMISTRIES)))
    order = rng.permutation(len(CHEMISTRIES))
    known = sorted(int(k) for k in order[: int(0.75 * len(CHEMISTRIES))])
    held_out -= set(known)

    reference: list[dict] = []
    ref_structs: list[Structure] = []
    for el in pool:
        s = _elemental_structure(el)
        comp = s.composition
        reference.append({
            "id": f"ref-{len(reference):04d}",
            "formula": comp.reduced_formula,
            **{f"energy_per_atom_{c}": model.energy(comp, c) for c in COLUMNS},
            **s.to_dict(),
        })
        ref_structs.append(s)
    k = 0
    while len(reference) < n_reference:
        kind, sp = CHEMISTRIES[known[k % len(known)]]
        variant = k // len(known)
        scale = 1.0 + 0.04 * variant
        s = prototype(kind, sp, scale)
        comp = s.composition
        extra = 0.0 if variant == 0 else 0.05 + 0.1 * rng.random()
        reference.append({
            "id": f"ref-{len(reference):04d}",
            "formula": comp.reduced_formula,
            **{f"energy_per_atom_{c}": model.energy(comp, c, extra) for c in COLUMNS},
            **s.to_dict(),
        })
        ref_structs.append(s)
        k += 1
    ref = Reference([
        ReferenceEntry(r["id"], Composition.from_formula(r["formula"]),
                       {c: r[f"energy_per_atom_{c}"] for c in COLUMNS})
        for r in reference
    ])

    offsets = (-0.04, 0.0, 0.05, 0.09, 0.3, 0.7)
    cands: list[dict] = []
    energies: list[dict] = []
    structures: list[Structure] = []
    n_bad = 6
    n_dup = 5
    n_regular = n_candidates - n_bad - n_dup
    novel_pool = sorted(held_out)
    for j in range(n_regular):
        if j % 3 == 0 and novel_pool:
            kind, sp = CHEMISTRIES[novel_pool[(j // 3) % len(novel_pool)]]
            s = prototype(kind, sp, 1.0)
        elif j % 3 == 1:
            kind, sp = CHEMISTRIES[known[j % len(known)]]
            s = prototype(kind, sp, 1.0)  # identical to a reference entry
        else:
            kind, sp = CHEMISTRIES[int(rng.integers(len(CHEMISTRIES)))]
            s = _jitter(prototype(kind, sp, 1.0 + 0.02 * rng.random()), rng, 0.004)
        sid = f"cand-{len(cands):03d}"
        structures.append(s)
        cands.append({"id": sid, **s.to_dict()})
        if j % 17 != 5:
            row = {"id": sid}
            for c in COLUMNS:
                e_min = hull_energy(s.composition, ref, c)
                row[c] = e_min + offsets[j % len(offsets)] + 0.01 * (rng.random() - 0.5)
            energies.append(row)
    for d in range(n_dup):
        src = cands[(7 * d + 1) % n_regular]
        sid = f"cand-{len(cands):03d}"
        cands.append({**src, "id": sid})
        structures.append(structures[(7 * d + 1) % n_regular])
        row = next((r for r in energies if r["id"] == src["id"]), None)
        if row is not None:
            energies.append({**row, "id": sid})

    bad: list = []
    bad.append(prototype("rocksalt", ("Na", "Cl"), 0.2).to_dict())  # atoms too close
    bad.append(prototype("fluorite", ("Na", "Cl"), 1.0).to_dict())  # NaCl2 cannot balance
    s = prototype("rocksalt", ("K", "Cl"), 1.0)
    bad.append({**s.to_dict(), "occupancy": [0.5] + [1.0] * 7})  # partial occupancy
    bad.append(Structure(Lattice.cubic(150.0), ["Cu"], [[0, 0, 0]]).to_dict())  # edge too long
    bad.append("{not valid json")  # unreadable
    bad.append({"id": "x", "lattice": [1, 0, 0], "species": ["Na"], "frac_coords": [[0, 0, 0]]})  # bad schema
    for rec in bad[: n_candidates - len(cands)]:
        sid = f"cand-{len(cands):03d}"
        cands.append({**rec, "id": sid} if isinstance(rec, dict) else rec)

    emb_rng = np.random.default_rng(seed + 7)
    embeddings = [
        {"id": c["id"], "embedding": [round(float(x), 6) for x in emb_rng.normal(0, 1, 8)]}
        for c in cands if isinstance(c, dict)
    ]
    reference_embeddings = [
        {"id": r["id"], "embedding": [round(float(x), 6) for x in emb_rng.normal(0.2, 1.1, 8)]}
        for r in reference
    ]
    relaxed = []
    for j in range(0, n_regular, 4):
        s = structures[j]
        for c in COLUMNS:
            moved = _jitter(s, rng, 0.01)
            relaxed.append({"id": cands[j]["id"], "column": c, **moved.to_dict()})
    return Corpus(cands, reference, energies, embeddings, reference_embeddings, relaxed)


def write_corpus(corpus: Corpus, directory: str | Path) -> dict[str, str]:
    """Write a corpus plus a matching run config; returns the file map."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)

    def jsonl(name, rows):
        with (d / name).open("w") as fh:
            for r in rows:
                fh.write((r if isinstance(r, str) else json.dumps(r)) + "\n")

    jsonl("candidates.jsonl", corpus.candidates)
    jsonl("reference.jsonl", corpus.reference)
    jsonl("embeddings.jsonl", corpus.embeddings)
    jsonl("reference_embeddings.jsonl", corpus.reference_embeddings)
    jsonl("relaxed.jsonl", corpus.relaxed)
    with (d / "energies.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["id", *COLUMNS])
        w.writeheader()
        for r in corpus.energies:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    config = {
        "candidates": ["candidates.jsonl"],
        "reference": "reference.jsonl",
        "energies": "energies.csv",
        "embeddings": "embeddings.jsonl",
        "reference_embeddings": "reference_embeddings.jsonl",
        "relaxed": "relaxed.jsonl",
        "model": {"name": "synthetic-mini"},
    }
    (d / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    return {k: str(d / k) for k in (
        "candidates.jsonl", "reference.jsonl", "energies.csv", "embeddings.jsonl",
        "reference_embeddings.jsonl", "relaxed.jsonl", "config.json",
    )}


def scale_corpus(directory: str | Path, n_candidates: int, n_reference: int, seed: int = 0) -> dict[str, str]:
    """Large corpus for throughput runs: composition-only reference with precomputed fingerprints."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    model = EnergyModel(seed)
    pool = _element_pool()
    with (d / "reference.jsonl").open("w") as fh:
        for i in range(n_reference):
            if i < len(pool):
                comp = Composition({pool[i]: 1})
            else:
                k = int(rng.integers(2, 5))
                els = rng.choice(len(pool), size=k, replace=False)
                comp = Composition({pool[e]: int(rng.integers(1, 5)) for e in els})
            rec = {
                "id": f"r{i:06d}",
                "formula": comp.reduced_formula,
                "fingerprint": f"{comp.reduced_formula}_1_{rng.integers(1 << 62):016x}",
            }
            for c in COLUMNS:
                extra = 0.0 if len(comp) == 1 else 0.3 * rng.random()
                rec[f"energy_per_atom_{c}"] = model.energy(comp, c, extra)
            fh.write(json.dumps(rec) + "\n")
    with (d / "candidates.jsonl").open("w") as fc, (d / "energies.csv").open("w", newline="") as fe:
        w = csv.writer(fe)
        w.writerow(["id", *COLUMNS])
        for i in range(n_candidates):
            kind, sp = CHEMISTRIES[int(rng.integers(len(CHEMISTRIES)))]
            s = _jitter(prototype(kind, sp, 1.0 + 0.05 * rng.random()), rng, 0.003)
            sid = f"c{i:06d}"
            fc.write(json.dumps({"id": sid, **s.to_dict()}) + "\n")
            comp = s.composition
            w.writerow([sid, *(repr(model.energy(comp, c, 0.4 * rng.random() - 0.1)) for c in COLUMNS)])
    config = {
        "candidates": ["candidates.jsonl"],
        "reference": "reference.jsonl",
        "energies": "energies.csv",
        "novelty_method": "fingerprint",
        "model": {"name": "synthetic-scale"},
    }
    (d / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    return {"config.json": str(d / "config.json")}


def bundled_mini_config() -> Path:
    """Path of the run config for the mini corpus shipped with the package."""
    return Path(__file__).resolve().parent / "data" / "mini" / "config.json"
