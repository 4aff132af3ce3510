"""Validity gate: geometric sanity checks plus hierarchical charge neutrality.

Charge neutrality is decided by the first stage that succeeds:

1. Metallic   -- composition is (mostly) metallic; every atom gets state 0.
2. Standard   -- one common oxidation state per element balances the formula.
3. DataDriven -- common states, mixed valence allowed (e.g. Fe2+/Fe3+).
4. Historical -- any historically observed state, accepted only when the
   states anti-correlate with electronegativity.

All enumeration runs on the gcd-reduced integer formula, so verdicts do not
depend on the supercell a structure happens to be given in.
"""

from __future__ import annotations

import enum
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import elements
from .errors import (
    EnumerationBudgetExceeded,
    MissingProbability,
    ProviderFailure,
    SchemaError,
    UndefinedCorrelation,
)
from .structure import (
    Composition,
    Structure,
    atomic_density,
    lattice_params,
    mass_density,
    min_interatomic_distance,
)
from .symmetry import FallbackProvider, SymmetryProvider

DEFAULT_BUDGET = 10**6


@dataclass(frozen=True)
class ValidityConfig:
    d_min: float = 0.7
    mass_density_range: tuple[float, float] = (0.01, 25.0)
    atomic_density_range: tuple[float, float] = (1e-5, 0.5)
    edge_range: tuple[float, float] = (1.0, 100.0)
    angle_range: tuple[float, float] = (0.0, 180.0)  # open interval
    metallicity_cutoff: float = 0.7
    symprec: float = 0.01
    charge_score_threshold: float = 0.0
    enumeration_budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        for name in ("mass_density_range", "atomic_density_range", "edge_range", "angle_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be a non-empty interval")
        if self.d_min <= 0:
            raise ValueError("d_min must be positive")


class Stage(str, enum.Enum):
    METALLIC = "Metallic"
    STANDARD = "Standard"
    DATA_DRIVEN = "DataDriven"
    HISTORICAL = "Historical"


@dataclass(frozen=True)
class OxidationStateTable:
    common: Mapping[str, tuple[tuple[int, float], ...]]
    historical: Mapping[str, tuple[int, ...]]
    electronegativity: Mapping[str, float]
    version: str = "custom"

    def probability(self, el: str, q: int) -> float:
        for state, p in self.common.get(el, ()):
            if state == q:
                return p
        raise MissingProbability(f"no probability for {el}{q:+d}")

    def common_states(self) -> dict[str, list[int]]:
        return {el: [q for q, _ in v] for el, v in self.common.items()}

    def historical_states(self) -> dict[str, list[int]]:
        return {el: list(v) for el, v in self.historical.items()}


def load_oxidation_table(path: str | Path | None = None) -> OxidationStateTable:
    """Load the JSON table; probabilities are renormalised per element."""
    if path is None:
        return _default_table()
    return _table_from_json(json.loads(Path(path).read_text()))


@lru_cache(maxsize=None)
def _default_table() -> OxidationStateTable:
    text = resources.files("crystalbench.data").joinpath("oxidation_states.json").read_text()
    return _table_from_json(json.loads(text))


def _table_from_json(raw: dict) -> OxidationStateTable:
    version = raw.get("version", "custom")
    body = raw.get("elements", raw)
    common, historical, chi = {}, {}, {}
    try:
        for el, rec in body.items():
            pairs = [(int(q), float(p)) for q, p in rec.get("common", [])]
            total = math.fsum(p for _, p in pairs)
            if pairs and total > 0:
                common[el] = tuple((q, p / total) for q, p in sorted(pairs))
            hist = set(int(q) for q in rec.get("historical", [])) | {q for q, _ in pairs}
            historical[el] = tuple(sorted(hist))
            if rec.get("chi") is not None:
                chi[el] = float(rec["chi"])
    except (TypeError, ValueError, AttributeError) as exc:
        raise SchemaError(f"bad oxidation-state table: {exc}") from None
    return OxidationStateTable(common, historical, chi, version)


@dataclass(frozen=True)
class ChargeAssignment:
    """Oxidation states for every atom of the reduced formula."""

    species: tuple[str, ...]
    states: tuple[int, ...]
    stage: Stage | None = None
    score: float = 0.0

    @property
    def total_charge(self) -> int:
        return sum(self.states)

    def mean_states(self) -> dict[str, float]:
        acc: dict[str, list[int]] = {}
        for el, q in zip(self.species, self.states):
            acc.setdefault(el, []).append(q)
        return {el: sum(v) / len(v) for el, v in acc.items()}

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value if self.stage else None,
            "score": self.score,
            "species": list(self.species),
            "states": list(self.states),
        }


@dataclass
class ValidityReport:
    readable: bool = False
    min_distance: bool = False
    density: bool = False
    lattice: bool = False
    symmetry_determinable: bool = False
    charge_neutral: bool = False
    assignment: ChargeAssignment | None = None
    space_group: int | None = None
    failure_reasons: list[str] = field(default_factory=list)

    CHECKS = ("readable", "min_distance", "density", "lattice", "symmetry_determinable", "charge_neutral")

    @property
    def overall(self) -> bool:
        return all(getattr(self, name) for name in self.CHECKS)

    def to_dict(self) -> dict:
        d = {name: getattr(self, name) for name in self.CHECKS}
        d["overall"] = self.overall
        d["space_group"] = self.space_group
        d["assignment"] = self.assignment.to_dict() if self.assignment else None
        d["failure_reasons"] = list(self.failure_reasons)
        return d


# --------------------------------------------------------------------------
# geometric checks


def check_lattice(s: Structure, cfg: ValidityConfig = ValidityConfig()) -> bool:
    if s.lattice.is_degenerate:
        return False
    a, b, c, al, be, ga = lattice_params(s.lattice)
    lo, hi = cfg.edge_range
    alo, ahi = cfg.angle_range
    return all(lo <= x <= hi for x in (a, b, c)) and all(alo < x < ahi for x in (al, be, ga))


def check_density(s: Structure, cfg: ValidityConfig = ValidityConfig()) -> bool:
    rho = mass_density(s)
    n = atomic_density(s)
    return (
        cfg.mass_density_range[0] <= rho <= cfg.mass_density_range[1]
        and cfg.atomic_density_range[0] <= n <= cfg.atomic_density_range[1]
    )


def check_min_distance(s: Structure, cfg: ValidityConfig = ValidityConfig()) -> bool:
    return min_interatomic_distance(s) > cfg.d_min


def check_symmetry_determinable(
    s: Structure,
    cfg: ValidityConfig = ValidityConfig(),
    provider: SymmetryProvider | None = None,
) -> bool:
    ok, _, _ = _space_group(s, cfg, provider)
    return ok


def _space_group(s, cfg, provider) -> tuple[bool, int | None, str | None]:
    provider = provider or FallbackProvider()
    try:
        number = provider.space_group(s, cfg.symprec)
    except ProviderFailure as exc:
        return False, None, str(exc)
    except Exception as exc:  # third-party providers may raise anything
        return False, None, f"{type(exc).__name__}: {exc}"
    if not 1 <= number <= 230:
        return False, None, f"space group {number} out of range"
    return True, number, None


# --------------------------------------------------------------------------
# charge neutrality


def metallicity_path(
    c: Composition,
    table: OxidationStateTable | None = None,
    cfg: ValidityConfig = ValidityConfig(),
) -> bool:
    """True when every element is a metal or metalloid and metals make up >= cutoff of the atoms."""
    if not len(c):
        return False
    share = 0.0
    for el, frac in c.fractions().items():
        data = elements.element(el)
        if not (data.is_metal or data.is_metalloid):
            return False
        if data.is_metal:
            share += frac
    return share >= cfg.metallicity_cutoff - 1e-12


def enumerate_balanced_assignments(
    c: Composition,
    states: Mapping[str, Sequence[int]],
    cap: int = DEFAULT_BUDGET,
    single_state: bool = False,
) -> list[ChargeAssignment]:
    """Every zero-charge assignment of the given states to the atoms of ``c``.

    Each element's atoms receive a multiset of states (mixed valence), or a
    single state when ``single_state`` is set. Results are sorted by state
    vector, elements ordered by electronegativity.
    """
    counts = c.integer_counts()
    order = sorted(counts, key=elements.electronegativity_key)
    opts = []
    for el in order:
        qs = sorted(set(states.get(el, ())))
        if not qs:
            return []
        opts.append(qs)
    ns = [counts[el] for el in order]
    k = len(order)
    lo = [0] * (k + 1)
    hi = [0] * (k + 1)
    for i in range(k - 1, -1, -1):
        lo[i] = lo[i + 1] + ns[i] * opts[i][0]
        hi[i] = hi[i + 1] + ns[i] * opts[i][-1]

    results: list[tuple[tuple[int, ...], tuple[str, ...]]] = []
    chosen: list[list[tuple[int, int]]] = []
    nodes = 0

    def tick():
        nonlocal nodes
        nodes += 1
        if nodes > cap:
            raise EnumerationBudgetExceeded(f"more than {cap} enumeration nodes")

    def emit():
        sp: list[str] = []
        qs: list[int] = []
        for el, parts in zip(order, chosen):
            for q, m in parts:
                sp.extend([el] * m)
                qs.extend([q] * m)
        results.append((tuple(qs), tuple(sp)))

    def visit(i: int, charge: int):
        tick()
        if i == k:
            if charge == 0:
                emit()
            return
        if not lo[i] <= -charge <= hi[i]:
            return
        if single_state:
            for q in opts[i]:
                chosen.append([(q, ns[i])])
                visit(i + 1, charge + q * ns[i])
                chosen.pop()
        else:
            split(i, 0, ns[i], charge, [])

    def split(i: int, j: int, remaining: int, charge: int, parts: list[tuple[int, int]]):
        tick()
        qs = opts[i]
        if j == len(qs) - 1:
            full = parts + ([(qs[j], remaining)] if remaining else [])
            chosen.append(full)
            visit(i + 1, charge + qs[j] * remaining)
            chosen.pop()
            return
        for m in range(remaining + 1):
            r = remaining - m
            new = charge + m * qs[j]
            # r atoms still to place on states qs[j+1:], then the remaining elements
            if new + r * qs[j + 1] + lo[i + 1] > 0 or new + r * qs[-1] + hi[i + 1] < 0:
                continue
            split(i, j + 1, r, new, parts + ([(qs[j], m)] if m else []))

    visit(0, 0)
    results.sort()
    return [ChargeAssignment(sp, qs) for qs, sp in results]


def score_assignment(a: ChargeAssignment, table: OxidationStateTable) -> float:
    """Geometric mean of the per-atom state probabilities."""
    if not a.states:
        return 0.0
    logs = [math.log(table.probability(el, q)) for el, q in zip(a.species, a.states)]
    return math.exp(math.fsum(logs) / len(logs))


def electronegativity_correlation(a: ChargeAssignment, table: OxidationStateTable) -> float:
    """Pearson correlation between per-element mean oxidation state and electronegativity."""
    means = a.mean_states()
    if len(means) < 2:
        raise UndefinedCorrelation("need at least two elements")
    xs, ys = [], []
    for el, q in means.items():
        chi = table.electronegativity.get(el)
        if chi is None:
            chi = elements.element(el).chi
        if chi is None:
            raise UndefinedCorrelation(f"no electronegativity for {el}")
        xs.append(q)
        ys.append(chi)
    x = np.array(xs) - np.mean(xs)
    y = np.array(ys) - np.mean(ys)
    denom = math.sqrt(float(x @ x) * float(y @ y))
    if denom == 0.0:
        raise UndefinedCorrelation("zero variance")
    return float(x @ y) / denom


def _best_scored(cands, table, stage, threshold) -> ChargeAssignment | None:
    best = None
    best_key = None
    for a in cands:
        score = score_assignment(a, table)
        if score < threshold:
            continue
        key = (-score, a.states)
        if best_key is None or key < best_key:
            best, best_key = ChargeAssignment(a.species, a.states, stage, score), key
    return best


def check_charge_neutrality(
    s: Structure | Composition,
    table: OxidationStateTable | None = None,
    cfg: ValidityConfig = ValidityConfig(),
) -> tuple[bool, ChargeAssignment | None]:
    table = table or _default_table()
    if isinstance(s, Structure):
        if s.has_partial_occupancy:
            return False, None
        comp = s.composition
    else:
        comp = s
    if not len(comp) or not comp.is_integer:
        return False, None
    comp = comp.reduced()
    counts = comp.integer_counts()
    order = sorted(counts, key=elements.electronegativity_key)
    flat = tuple(el for el in order for _ in range(counts[el]))

    if metallicity_path(comp, table, cfg):
        return True, ChargeAssignment(flat, (0,) * len(flat), Stage.METALLIC, 1.0)

    if len(comp) == 1:
        # an elemental solid is neutral with every atom at zero
        return True, ChargeAssignment(flat, (0,) * len(flat), Stage.STANDARD, 1.0)

    common = table.common_states()
    for stage, single in ((Stage.STANDARD, True), (Stage.DATA_DRIVEN, False)):
        try:
            cands = enumerate_balanced_assignments(comp, common, cfg.enumeration_budget, single_state=single)
        except EnumerationBudgetExceeded:
            continue
        best = _best_scored(cands, table, stage, cfg.charge_score_threshold)
        if best is not None:
            return True, best

    try:
        cands = enumerate_balanced_assignments(comp, table.historical_states(), cfg.enumeration_budget)
    except EnumerationBudgetExceeded:
        return False, None
    best, best_key = None, None
    for a in cands:
        try:
            r = electronegativity_correlation(a, table)
        except UndefinedCorrelation:
            continue
        if r < 0:
            key = (r, a.states)
            if best_key is None or key < best_key:
                best, best_key = ChargeAssignment(a.species, a.states, Stage.HISTORICAL, 0.0), key
    return (best is not None), best


# --------------------------------------------------------------------------
# aggregate


def validity_report(
    s: Structure | None,
    table: OxidationStateTable | None = None,
    cfg: ValidityConfig = ValidityConfig(),
    provider: SymmetryProvider | None = None,
) -> ValidityReport:
    """Run every check. ``s=None`` stands for an input that could not be parsed."""
    rep = ValidityReport()
    if s is None:
        rep.failure_reasons.append("readable")
        return rep
    rep.readable = True
    rep.lattice = check_lattice(s, cfg)
    if s.lattice.is_degenerate:
        rep.failure_reasons += ["min_distance", "density", "lattice", "symmetry_determinable", "charge_neutral"]
        return rep
    rep.min_distance = check_min_distance(s, cfg)
    rep.density = check_density(s, cfg)
    ok, number, why = _space_group(s, cfg, provider)
    rep.symmetry_determinable = ok
    rep.space_group = number
    rep.charge_neutral, rep.assignment = check_charge_neutrality(s, table, cfg)
    for name in ValidityReport.CHECKS[1:]:
        if not getattr(rep, name):
            if name == "symmetry_determinable" and why:
                rep.failure_reasons.append(f"{name}: {why}")
            elif name == "charge_neutral" and s.has_partial_occupancy:
                rep.failure_reasons.append(f"{name}: PartialOccupancy")
            else:
                rep.failure_reasons.append(name)
    return rep


def validity_rate(reports: Sequence[ValidityReport]) -> float:
    if not reports:
        return 0.0
    return 100.0 * sum(r.overall for r in reports) / len(reports)
