"""Thermodynamic stability against a reference set.

Every energy column (one per energy model) gets its own chemical potentials
and its own hull, so a candidate is only ever compared with reference
energies from the model that scored it.
"""

from __future__ import annotations

import csv
import enum
import itertools
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyReference,
    InfeasibleComposition,
    LengthMismatch,
    SchemaError,
    UncoveredElement,
    UnknownElement,
)
from .lp import solve_lp
from .structure import Composition, Structure

ENERGY_PREFIX = "energy_per_atom_"


@dataclass(frozen=True)
class ReferenceEntry:
    id: str
    composition: Composition
    energy_per_atom: Mapping[str, float]
    fingerprint: str | None = None
    structure: Structure | None = None

    def __post_init__(self):
        if not self.energy_per_atom:
            raise SchemaError(f"reference entry {self.id!r} has no energy columns")
        for col, e in self.energy_per_atom.items():
            if not math.isfinite(e):
                raise SchemaError(f"reference entry {self.id!r} has non-finite energy in {col!r}")


@dataclass(frozen=True)
class ChemicalPotentialTable:
    mu: Mapping[str, Mapping[str, float]]  # column -> element -> eV/atom
    uncovered: Mapping[str, tuple[str, ...]]  # column -> elements with no elemental entry

    def get(self, column: str, el: str) -> float:
        try:
            return self.mu[column][el]
        except KeyError:
            raise UncoveredElement(f"no elemental reference for {el} in column {column!r}") from None


def chemical_potentials(entries: Iterable[ReferenceEntry]) -> ChemicalPotentialTable:
    mu: dict[str, dict[str, float]] = {}
    seen: dict[str, set[str]] = {}
    for ent in entries:
        for col, e in ent.energy_per_atom.items():
            seen.setdefault(col, set()).update(ent.composition)
            if len(ent.composition) == 1:
                (el,) = ent.composition
                table = mu.setdefault(col, {})
                if el not in table or e < table[el]:
                    table[el] = e
    uncovered = {
        col: tuple(sorted(els - set(mu.get(col, {})))) for col, els in sorted(seen.items())
    }
    return ChemicalPotentialTable({c: dict(sorted(v.items())) for c, v in sorted(mu.items())}, uncovered)


class Reference:
    """Reference entries indexed by chemical system, per energy column."""

    def __init__(self, entries: Sequence[ReferenceEntry]):
        if not entries:
            raise EmptyReference("reference set is empty")
        self.entries = tuple(entries)
        self.mu = chemical_potentials(self.entries)
        self.columns = tuple(sorted({c for e in self.entries for c in e.energy_per_atom}))
        by_system: dict[frozenset, list[int]] = {}
        for k, ent in enumerate(self.entries):
            by_system.setdefault(ent.composition.chemical_system, []).append(k)
        self._by_system = by_system
        self._cache: dict[tuple[str, tuple[str, ...]], tuple[np.ndarray, np.ndarray]] = {}

    def __len__(self):
        return len(self.entries)

    def fingerprints(self) -> set[str]:
        return {e.fingerprint for e in self.entries if e.fingerprint}

    def subspace(self, elements_: Iterable[str]) -> list[int]:
        """Indices of entries whose elements are a subset of ``elements_``."""
        els = sorted(set(elements_))
        out: list[int] = []
        if len(els) <= 12:
            for r in range(1, len(els) + 1):
                for sub in itertools.combinations(els, r):
                    out.extend(self._by_system.get(frozenset(sub), ()))
        else:
            allowed = set(els)
            for sys_, idx in self._by_system.items():
                if sys_ <= allowed:
                    out.extend(idx)
        return sorted(out)

    def hull_problem(self, column: str, els: tuple[str, ...]) -> tuple[np.ndarray, np.ndarray]:
        """Fraction matrix (len(els) x m) and energies of the column's entries in the subspace."""
        key = (column, els)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        cols, energies = [], []
        for k in self.subspace(els):
            ent = self.entries[k]
            e = ent.energy_per_atom.get(column)
            if e is None:
                continue
            cols.append([ent.composition.fraction(el) for el in els])
            energies.append(e)
        A = np.array(cols, dtype=float).T.reshape(len(els), len(cols))
        out = (A, np.array(energies, dtype=float))
        if len(self._cache) > 50_000:
            self._cache.clear()
        self._cache[key] = out
        return out


# --------------------------------------------------------------------------
# loading


def _composition_from_record(rec: Mapping, where: str) -> tuple[Composition, Structure | None]:
    structure = None
    if "lattice" in rec and "species" in rec:
        structure = Structure.from_dict(rec)
    try:
        if rec.get("formula"):
            return Composition.from_formula(str(rec["formula"])), structure
        if rec.get("composition"):
            comp = rec["composition"]
            if isinstance(comp, str):
                comp = json.loads(comp)
            return Composition({k: float(v) for k, v in comp.items()}), structure
    except (ValueError, TypeError, UnknownElement, json.JSONDecodeError) as exc:
        raise SchemaError(f"{where}: bad composition: {exc}") from None
    if structure is not None:
        return structure.composition, structure
    raise SchemaError(f"{where}: needs 'formula', 'composition' or a structure")


def _entry_from_record(rec: Mapping, where: str) -> ReferenceEntry:
    if "id" not in rec or rec["id"] in (None, ""):
        raise SchemaError(f"{where}: missing 'id'")
    energies = {}
    for key, value in rec.items():
        if key.startswith(ENERGY_PREFIX) and value not in (None, ""):
            try:
                energies[key[len(ENERGY_PREFIX):]] = float(value)
            except (TypeError, ValueError):
                raise SchemaError(f"{where}: bad energy {key}={value!r}") from None
    if isinstance(rec.get("energies"), Mapping):
        energies.update({str(k): float(v) for k, v in rec["energies"].items()})
    comp, structure = _composition_from_record(rec, where)
    fp = rec.get("fingerprint") or None
    return ReferenceEntry(str(rec["id"]), comp, energies, fp, structure)


def read_reference_entries(path: str | Path) -> list[ReferenceEntry]:
    path = Path(path)
    entries = []
    if path.suffix.lower() == ".csv":
        with path.open(newline="") as fh:
            for n, row in enumerate(csv.DictReader(fh), start=2):
                entries.append(_entry_from_record(row, f"{path.name}:{n}"))
    else:
        with path.open() as fh:
            for n, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"{path.name}:{n}: {exc}") from None
                entries.append(_entry_from_record(rec, f"{path.name}:{n}"))
    if not entries:
        raise EmptyReference(f"{path} contains no entries")
    return entries


def load_reference(path: str | Path) -> tuple[list[ReferenceEntry], ChemicalPotentialTable]:
    entries = read_reference_entries(path)
    return entries, chemical_potentials(entries)


# --------------------------------------------------------------------------
# energies


def formation_energy(c: Composition, e: float, mu: ChemicalPotentialTable, column: str) -> float:
    """Per-atom formation energy e - sum_i x_i mu_i."""
    return e - math.fsum(x * mu.get(column, el) for el, x in c.fractions().items())


def _as_reference(entries) -> Reference:
    return entries if isinstance(entries, Reference) else Reference(list(entries))


def hull_energy(c: Composition, entries: Reference | Sequence[ReferenceEntry], column: str) -> float:
    """Lowest energy per atom reachable by mixing reference phases at composition ``c``."""
    ref = _as_reference(entries)
    els = tuple(sorted(c))
    A, energies = ref.hull_problem(column, els)
    if A.shape[1] == 0:
        raise InfeasibleComposition(f"no reference entries for {'-'.join(els)} in {column!r}")
    b = np.array([c.fraction(el) for el in els])
    res = solve_lp(energies, A, b)
    if not res.ok:
        raise InfeasibleComposition(
            f"{c.reduced_formula} is not reachable from the {column!r} reference ({res.status})"
        )
    return res.objective


def e_above_hull(
    c: Composition, e: float, entries: Reference | Sequence[ReferenceEntry], column: str
) -> float:
    return e - hull_energy(c, entries, column)


# --------------------------------------------------------------------------
# ensemble classification


@dataclass(frozen=True)
class StabilityThresholds:
    stable_max: float = 0.0
    metastable_max: float = 0.1

    def __post_init__(self):
        if self.stable_max > self.metastable_max:
            raise ValueError("stable_max must not exceed metastable_max")


class StabilityClass(str, enum.Enum):
    STABLE = "Stable"
    METASTABLE = "Metastable"
    UNSTABLE = "Unstable"
    UNEVALUABLE = "Unevaluable"


def classify(e_hull_mean: float, thresholds: StabilityThresholds = StabilityThresholds()) -> StabilityClass:
    if not math.isfinite(e_hull_mean):
        return StabilityClass.UNEVALUABLE
    if e_hull_mean <= thresholds.stable_max:
        return StabilityClass.STABLE
    if e_hull_mean <= thresholds.metastable_max:
        return StabilityClass.METASTABLE
    return StabilityClass.UNSTABLE


def mean_std(values: Sequence[float]) -> tuple[float | None, float | None]:
    """Mean and sample (N-1) standard deviation; std is None below two values."""
    n = len(values)
    if n == 0:
        return None, None
    mean = math.fsum(values) / n
    if n < 2:
        return mean, None
    return mean, math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))


@dataclass
class StabilityResult:
    e_form: dict[str, float] = field(default_factory=dict)
    e_hull: dict[str, float] = field(default_factory=dict)
    e_form_mean: float | None = None
    e_form_std: float | None = None
    e_hull_mean: float | None = None
    e_hull_std: float | None = None
    stability_class: StabilityClass = StabilityClass.UNEVALUABLE
    skipped: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "class": self.stability_class.value,
            "e_form": dict(self.e_form),
            "e_hull": dict(self.e_hull),
            "e_form_mean": self.e_form_mean,
            "e_form_std": self.e_form_std,
            "e_hull_mean": self.e_hull_mean,
            "e_hull_std": self.e_hull_std,
            "skipped": dict(self.skipped),
        }


def ensemble_stability(
    c: Composition,
    energies: Mapping[str, float],
    entries: Reference | Sequence[ReferenceEntry],
    thresholds: StabilityThresholds = StabilityThresholds(),
) -> StabilityResult:
    ref = _as_reference(entries)
    res = StabilityResult()
    for col, e in energies.items():
        if e is None or not math.isfinite(e):
            res.skipped[col] = "missing energy"
            continue
        if col not in ref.columns:
            res.skipped[col] = "column absent from reference"
            continue
        try:
            ef = formation_energy(c, e, ref.mu, col)
            eh = e_above_hull(c, e, ref, col)
        except (UncoveredElement, InfeasibleComposition) as exc:
            res.skipped[col] = str(exc)
            continue
        res.e_form[col] = ef
        res.e_hull[col] = eh
    if res.e_hull:
        res.e_form_mean, res.e_form_std = mean_std(list(res.e_form.values()))
        res.e_hull_mean, res.e_hull_std = mean_std(list(res.e_hull.values()))
        res.stability_class = classify(res.e_hull_mean, thresholds)
    return res


def stability_f1(
    predicted: Sequence[float], truth: Sequence[float], threshold: float
) -> tuple[float, float, float]:
    """Precision, recall and F1 of "E_hull < threshold" labels; 0/0 is taken as 0."""
    if len(predicted) != len(truth):
        raise LengthMismatch(f"{len(predicted)} predictions vs {len(truth)} truth values")
    p = [x < threshold for x in predicted]
    t = [x < threshold for x in truth]
    tp = sum(a and b for a, b in zip(p, t))
    fp = sum(a and not b for a, b in zip(p, t))
    fn = sum(b and not a for a, b in zip(p, t))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1
