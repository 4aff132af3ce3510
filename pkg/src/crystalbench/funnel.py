"""Uniqueness, novelty and the stable/metastable funnel.

Funnel order is stability, then uniqueness within each stability class, then
novelty of the unique representatives. Every rate is a percentage of the
submitted count, so no rate can exceed the validity rate.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .fingerprint import MatchTolerances, fingerprint, match_structures
from .hull import Reference, StabilityClass, StabilityResult, StabilityThresholds, classify
from .structure import Structure


class IdentityMethod(str, enum.Enum):
    FINGERPRINT = "fingerprint"
    MATCHER = "matcher"


@dataclass(frozen=True)
class UniquenessResult:
    scores: tuple[float, ...]
    counts: tuple[int, ...]
    representative_flags: tuple[bool, ...]

    @property
    def mean_score(self) -> float:
        return math.fsum(self.scores) / len(self.scores) if self.scores else 0.0

    @property
    def n_unique(self) -> int:
        return sum(self.representative_flags)

    @property
    def unique_fraction(self) -> float:
        return self.n_unique / len(self.scores) if self.scores else 0.0


def uniqueness_from_keys(keys: Sequence) -> UniquenessResult:
    """u_i = 1/c_i where c_i counts structures sharing key i; first occurrence is the representative."""
    counts = Counter(keys)
    seen = set()
    flags = []
    for k in keys:
        flags.append(k not in seen)
        seen.add(k)
    c = tuple(counts[k] for k in keys)
    return UniquenessResult(tuple(1.0 / x for x in c), c, tuple(flags))


def _matcher_groups(structures: Sequence[Structure], tol: MatchTolerances) -> list[int]:
    """Group id per structure: index of the first earlier representative it matches."""
    reps: list[int] = []
    group = []
    for i, s in enumerate(structures):
        for r in reps:
            if match_structures(structures[r], s, tol):
                group.append(r)
                break
        else:
            reps.append(i)
            group.append(i)
    return group


def uniqueness(
    structures: Sequence[Structure],
    method: IdentityMethod | str = IdentityMethod.FINGERPRINT,
    tol: MatchTolerances = MatchTolerances(),
    fingerprints: Sequence[str] | None = None,
) -> UniquenessResult:
    method = IdentityMethod(method)
    if method is IdentityMethod.FINGERPRINT:
        keys = list(fingerprints) if fingerprints is not None else [fingerprint(s).value for s in structures]
        return uniqueness_from_keys(keys)
    return uniqueness_from_keys(_matcher_groups(structures, tol))


class ReferenceIndex:
    """Known materials for novelty: fingerprint strings plus structures grouped by formula."""

    def __init__(self, fingerprints: Iterable[str] = (), structures: Iterable[Structure] = ()):
        self.fingerprints = frozenset(fingerprints)
        by_formula: dict[str, list[Structure]] = {}
        for s in structures:
            by_formula.setdefault(s.composition.reduced_formula, []).append(s)
        self.by_formula = by_formula

    @classmethod
    def from_reference(
        cls, ref: Reference | Sequence, compute_missing: bool = True, provider=None
    ) -> ReferenceIndex:
        entries = ref.entries if isinstance(ref, Reference) else ref
        fps, structs = [], []
        for e in entries:
            if e.structure is not None:
                structs.append(e.structure)
            if e.fingerprint:
                fps.append(e.fingerprint)
            elif compute_missing and e.structure is not None:
                fps.append(fingerprint(e.structure, provider).value)
        return cls(fps, structs)

    @classmethod
    def from_file(cls, path: str | Path) -> ReferenceIndex:
        lines = Path(path).read_text().splitlines()
        return cls(line.strip() for line in lines if line.strip())

    @property
    def has_structures(self) -> bool:
        return bool(self.by_formula)

    def contains_fingerprint(self, fp: str) -> bool:
        return fp in self.fingerprints

    def contains_match(self, s: Structure, tol: MatchTolerances = MatchTolerances()) -> bool:
        return any(match_structures(r, s, tol) for r in self.by_formula.get(s.composition.reduced_formula, ()))


@dataclass(frozen=True)
class NoveltyResult:
    flags: tuple[bool, ...]

    @property
    def n_novel(self) -> int:
        return sum(self.flags)

    @property
    def rate(self) -> float:
        return 100.0 * self.n_novel / len(self.flags) if self.flags else 0.0


def novelty(
    structures: Sequence[Structure],
    reference: ReferenceIndex,
    method: IdentityMethod | str = IdentityMethod.FINGERPRINT,
    tol: MatchTolerances = MatchTolerances(),
    fingerprints: Sequence[str] | None = None,
) -> NoveltyResult:
    method = IdentityMethod(method)
    if method is IdentityMethod.FINGERPRINT:
        keys = list(fingerprints) if fingerprints is not None else [fingerprint(s).value for s in structures]
        return NoveltyResult(tuple(not reference.contains_fingerprint(k) for k in keys))
    return NoveltyResult(tuple(not reference.contains_match(s, tol) for s in structures))


# --------------------------------------------------------------------------
# funnel


RATE_FIELDS = (
    "valid", "unique", "novel",
    "stable", "unique_stable", "sun",
    "metastable", "unique_metastable", "msun",
)


@dataclass
class FunnelResult:
    n_submitted: int = 0
    n_valid: int = 0
    n_unique: int = 0
    n_novel: int = 0
    n_stable: int = 0
    n_unique_stable: int = 0
    n_sun: int = 0
    n_metastable: int = 0
    n_unique_metastable: int = 0
    n_msun: int = 0
    n_unevaluable: int = 0
    uniqueness_score: float = 0.0
    labels: list[str] = field(default_factory=list)

    def rate(self, name: str) -> float:
        n = getattr(self, f"n_{name}")
        return 100.0 * n / self.n_submitted if self.n_submitted else 0.0

    @property
    def rates(self) -> dict[str, float]:
        return {name: self.rate(name) for name in RATE_FIELDS}

    def chain_holds(self) -> bool:
        return (
            self.n_sun <= self.n_unique_stable <= self.n_stable <= self.n_valid <= self.n_submitted
            and self.n_msun <= self.n_unique_metastable <= self.n_metastable <= self.n_valid
            and self.n_novel <= self.n_unique <= self.n_valid
        )

    def to_dict(self) -> dict:
        d = {f"n_{name}": getattr(self, f"n_{name}") for name in ("submitted",) + RATE_FIELDS}
        d["n_unevaluable"] = self.n_unevaluable
        d["uniqueness_score"] = self.uniqueness_score
        d["rates"] = self.rates
        return d


def compute_funnel(
    n_submitted: int,
    valid: Sequence[bool],
    classes: Sequence[StabilityClass | None],
    representatives: Callable[[list[int]], Sequence[bool]],
    is_novel: Callable[[list[int]], Sequence[bool]],
    uniqueness_scores: Callable[[list[int]], Sequence[float]] | None = None,
) -> FunnelResult:
    """Funnel over index lists; identity is supplied through the two callbacks.

    ``representatives(idx)`` flags first occurrences within ``idx`` and
    ``is_novel(idx)`` flags entries absent from the reference.
    """
    res = FunnelResult(n_submitted=n_submitted)
    labels = ["invalid"] * n_submitted
    valid_idx = [i for i in range(n_submitted) if valid[i]]
    res.n_valid = len(valid_idx)

    # sequential view: unique among valid, novel among unique
    if valid_idx:
        reps = [i for i, f in zip(valid_idx, representatives(valid_idx)) if f]
        res.n_unique = len(reps)
        res.n_novel = sum(bool(x) for x in is_novel(reps)) if reps else 0
        if uniqueness_scores is not None:
            scores = uniqueness_scores(valid_idx)
            res.uniqueness_score = math.fsum(scores) / len(scores)
        else:
            res.uniqueness_score = res.n_unique / len(valid_idx)

    for i in valid_idx:
        cls = classes[i]
        if cls is None or cls is StabilityClass.UNEVALUABLE:
            labels[i] = "unevaluable"
            res.n_unevaluable += 1
        else:
            labels[i] = cls.value.lower()

    for cls, prefix, tag in (
        (StabilityClass.STABLE, "stable", "SUN"),
        (StabilityClass.METASTABLE, "metastable", "MSUN"),
    ):
        members = [i for i in valid_idx if classes[i] is cls]
        setattr(res, f"n_{prefix}", len(members))
        if not members:
            continue
        flags = representatives(members)
        reps = [i for i, f in zip(members, flags) if f]
        for i, f in zip(members, flags):
            if not f:
                labels[i] = f"{prefix}-duplicate"
        setattr(res, f"n_unique_{prefix}", len(reps))
        novel = is_novel(reps)
        n_new = 0
        for i, nv in zip(reps, novel):
            labels[i] = tag if nv else f"{prefix}-known"
            n_new += bool(nv)
        setattr(res, "n_sun" if tag == "SUN" else "n_msun", n_new)
    res.labels = labels
    return res


def sun_rates(
    structures: Sequence[Structure | None],
    stability: Sequence[StabilityResult | None],
    reference: ReferenceIndex,
    thresholds: StabilityThresholds = StabilityThresholds(),
    valid: Sequence[bool] | None = None,
    uniqueness_method: IdentityMethod | str = IdentityMethod.FINGERPRINT,
    novelty_method: IdentityMethod | str | None = None,
    tol: MatchTolerances = MatchTolerances(),
    fingerprints: Sequence[str | None] | None = None,
) -> FunnelResult:
    """Funnel over a submitted set.

    ``stability[i]`` is None for invalid structures. Classes are re-derived
    from each result's mean E_hull with ``thresholds``. Novelty defaults to the
    structure matcher when the index holds structures, else fingerprints.
    """
    n = len(structures)
    if valid is None:
        valid = [st is not None and s is not None for s, st in zip(structures, stability)]
    classes: list[StabilityClass | None] = []
    for st in stability:
        if st is None or st.e_hull_mean is None:
            classes.append(None if st is None else StabilityClass.UNEVALUABLE)
        else:
            classes.append(classify(st.e_hull_mean, thresholds))
    uniqueness_method = IdentityMethod(uniqueness_method)
    if novelty_method is None:
        novelty_method = IdentityMethod.MATCHER if reference.has_structures else IdentityMethod.FINGERPRINT
    novelty_method = IdentityMethod(novelty_method)

    fps: list[str | None] = list(fingerprints) if fingerprints is not None else [None] * n

    def fp(i: int) -> str:
        if fps[i] is None:
            fps[i] = fingerprint(structures[i]).value
        return fps[i]

    def representatives(idx: list[int]) -> list[bool]:
        if uniqueness_method is IdentityMethod.FINGERPRINT:
            return list(uniqueness_from_keys([fp(i) for i in idx]).representative_flags)
        return list(uniqueness([structures[i] for i in idx], IdentityMethod.MATCHER, tol).representative_flags)

    def scores(idx: list[int]) -> list[float]:
        if uniqueness_method is IdentityMethod.FINGERPRINT:
            return list(uniqueness_from_keys([fp(i) for i in idx]).scores)
        return list(uniqueness([structures[i] for i in idx], IdentityMethod.MATCHER, tol).scores)

    def is_novel(idx: list[int]) -> list[bool]:
        if novelty_method is IdentityMethod.FINGERPRINT:
            return [not reference.contains_fingerprint(fp(i)) for i in idx]
        return [not reference.contains_match(structures[i], tol) for i in idx]

    return compute_funnel(n, valid, classes, representatives, is_novel, scores)
