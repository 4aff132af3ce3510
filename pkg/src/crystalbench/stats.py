"""Diversity and distribution-similarity metrics.

Entropies use the natural log (so Vendi = exp(H)); Jensen-Shannon uses base 2
so that the distance lies in [0, 1].
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Hashable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from . import elements
from .errors import BinMismatch, DimensionMismatch, EmptyDistribution, NonPsdCovariance, ProviderFailure
from .fingerprint import crystal_graph
from .structure import Structure, lattice_params, mass_density
from .symmetry import FallbackProvider, SymmetryProvider

PSD_TOL = 1e-8


def _counts(counts) -> list[float]:
    values = list(counts.values()) if isinstance(counts, Mapping) else list(counts)
    if any(v < 0 for v in values):
        raise ValueError("counts must be non-negative")
    if math.fsum(values) <= 0:
        raise EmptyDistribution("total count is zero")
    return values


def shannon_entropy(counts: Mapping[Hashable, float] | Sequence[float]) -> float:
    """H = -sum p_i ln p_i in nats."""
    values = _counts(counts)
    total = math.fsum(values)
    return -math.fsum((v / total) * math.log(v / total) for v in values if v > 0) + 0.0


def vendi(counts) -> float:
    return math.exp(shannon_entropy(counts))


def normalized_entropy(counts) -> float:
    """H / ln k over the k observed categories; 0 for a single category."""
    k = sum(1 for v in _counts(counts) if v > 0)
    return shannon_entropy(counts) / math.log(k) if k > 1 else 0.0


# --------------------------------------------------------------------------
# diversity


@dataclass(frozen=True)
class DiversityResult:
    elem_div: float
    sg_div: float
    size_div: float
    site_div: float
    elem_entropy: float
    sg_entropy: float
    size_entropy: float
    site_entropy: float

    def to_dict(self) -> dict:
        return {
            "elem_div": self.elem_div,
            "sg_div": self.sg_div,
            "size_div": self.size_div,
            "site_div": self.site_div,
            "entropy_nats": {
                "element": self.elem_entropy,
                "space_group": self.sg_entropy,
                "size": self.size_entropy,
                "site": self.site_entropy,
            },
        }


def space_group_labels(
    structures: Sequence[Structure], provider: SymmetryProvider | None = None, symprec: float = 0.01
) -> list[int | str]:
    provider = provider or FallbackProvider()
    out: list[int | str] = []
    for s in structures:
        try:
            out.append(int(provider.space_group(s, symprec)))
        except ProviderFailure:
            out.append("unknown")
    return out


def site_categories(s: Structure) -> list[tuple[str, int]]:
    g = crystal_graph(s)
    return [(g.labels[i], g.degree(i)) for i in range(g.num_nodes)]


def diversity_suite(
    structures: Sequence[Structure],
    space_groups: Sequence[int | str] | None = None,
    provider: SymmetryProvider | None = None,
    site_cats: Sequence[Sequence[tuple[str, int]]] | None = None,
) -> DiversityResult:
    if not structures:
        raise EmptyDistribution("diversity needs at least one structure")
    if space_groups is None:
        space_groups = space_group_labels(structures, provider)
    if site_cats is None:
        site_cats = [site_categories(s) for s in structures]
    elem = Counter(el for s in structures for el in set(s.species))
    sg = Counter(space_groups)
    size = Counter(len(s) for s in structures)
    site = Counter(cat for cats in site_cats for cat in cats)
    h_site = shannon_entropy(site)
    return DiversityResult(
        elem_div=normalized_entropy(elem),
        sg_div=normalized_entropy(sg),
        size_div=normalized_entropy(size),
        site_div=math.exp(h_site),
        elem_entropy=shannon_entropy(elem),
        sg_entropy=shannon_entropy(sg),
        size_entropy=shannon_entropy(size),
        site_entropy=h_site,
    )


# --------------------------------------------------------------------------
# Jensen-Shannon


def _kl2(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return math.fsum(p[mask] * np.log2(p[mask] / q[mask]))


def js_distance(P: Sequence[float], Q: Sequence[float]) -> float:
    """sqrt of the base-2 Jensen-Shannon divergence between two binned distributions."""
    p = np.asarray(_counts(P), dtype=float)
    q = np.asarray(_counts(Q), dtype=float)
    if p.shape != q.shape:
        raise BinMismatch(f"{p.size} bins vs {q.size} bins")
    p = p / math.fsum(p)
    q = q / math.fsum(q)
    m = 0.5 * (p + q)
    jsd = 0.5 * _kl2(p, m) + 0.5 * _kl2(q, m)
    return math.sqrt(min(max(jsd, 0.0), 1.0))


def _aligned(a: Counter, b: Counter) -> tuple[list[float], list[float]]:
    keys = sorted(set(a) | set(b), key=lambda k: (str(type(k)), k))
    return [a.get(k, 0) for k in keys], [b.get(k, 0) for k in keys]


def _density_hist(gen: Sequence[float], ref: Sequence[float], bins: int) -> tuple[np.ndarray, np.ndarray]:
    pooled = np.concatenate([gen, ref])
    lo, hi = float(pooled.min()), float(pooled.max())
    if hi <= lo:
        return np.array([len(gen)], float), np.array([len(ref)], float)
    edges = np.linspace(lo, hi, bins + 1)
    return np.histogram(gen, edges)[0].astype(float), np.histogram(ref, edges)[0].astype(float)


@dataclass(frozen=True)
class JsInputs:
    """Per-structure quantities the aggregate JS needs.

    A field left as None (e.g. densities for a composition-only reference)
    drops that component from the aggregate.
    """

    space_groups: tuple | None
    element_sets: tuple[tuple[str, ...], ...]
    n_sites: tuple[int, ...] | None
    densities: tuple[float, ...] | None

    @classmethod
    def from_structures(cls, structures: Sequence[Structure], space_groups=None, provider=None) -> JsInputs:
        if space_groups is None:
            space_groups = space_group_labels(structures, provider)
        return cls(
            tuple(space_groups),
            tuple(tuple(sorted(set(s.species))) for s in structures),
            tuple(len(s) for s in structures),
            tuple(mass_density(s) for s in structures),
        )


def js_components(gen: JsInputs, ref: JsInputs, density_bins: int = 20) -> dict[str, float]:
    if not gen.element_sets or not ref.element_sets:
        raise EmptyDistribution("JS needs non-empty generated and reference sets")
    out = {}
    if gen.space_groups is not None and ref.space_groups is not None:
        out["space_group"] = js_distance(*_aligned(Counter(gen.space_groups), Counter(ref.space_groups)))
    out["elements"] = js_distance(
        *_aligned(Counter(e for es in gen.element_sets for e in es), Counter(e for es in ref.element_sets for e in es))
    )
    if gen.n_sites is not None and ref.n_sites is not None:
        lo = min(min(gen.n_sites), min(ref.n_sites))
        hi = max(max(gen.n_sites), max(ref.n_sites))
        cg, cr = Counter(gen.n_sites), Counter(ref.n_sites)
        out["n_sites"] = js_distance(
            [cg.get(k, 0) for k in range(lo, hi + 1)], [cr.get(k, 0) for k in range(lo, hi + 1)]
        )
    if gen.densities is not None and ref.densities is not None:
        out["density"] = js_distance(*_density_hist(np.array(gen.densities), np.array(ref.densities), density_bins))
    return out


def js_aggregate(gen, ref, density_bins: int = 20) -> float:
    """Mean JS distance over space group, element presence, site count and binned mass density."""
    if not isinstance(gen, JsInputs):
        gen = JsInputs.from_structures(gen)
    if not isinstance(ref, JsInputs):
        ref = JsInputs.from_structures(ref)
    comps = js_components(gen, ref, density_bins)
    return math.fsum(comps.values()) / len(comps)


# --------------------------------------------------------------------------
# MMD


FEATURE_NAMES = (
    "a", "b", "c", "alpha", "beta", "gamma",
    "volume_per_atom", "n_sites", "mass_density", "mean_electronegativity", "mean_atomic_mass",
)


def feature_vector(s: Structure) -> np.ndarray:
    a, b, c, al, be, ga = lattice_params(s.lattice)
    chis = [elements.element(el).chi for el in s.species]
    chi = [x for x in chis if x is not None]
    masses = [elements.element(el).mass for el in s.species]
    return np.array([
        a, b, c, al, be, ga,
        s.volume / len(s),
        float(len(s)),
        mass_density(s),
        float(np.mean(chi)) if chi else 0.0,
        float(np.mean(masses)),
    ])


def _sq_dists(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    d = np.einsum("ij,ij->i", X, X)[:, None] + np.einsum("ij,ij->i", Y, Y)[None, :] - 2.0 * X @ Y.T
    return np.maximum(d, 0.0)


def median_bandwidth(Z: np.ndarray) -> float:
    """Median pairwise distance; falls back to the median of the non-zero ones."""
    d = np.sqrt(_sq_dists(Z, Z)[np.triu_indices(len(Z), k=1)])
    med = float(np.median(d)) if d.size else 0.0
    if med > 0:
        return med
    pos = d[d > 0]
    return float(np.median(pos)) if pos.size else 0.0


def standardize(X, Y) -> tuple[np.ndarray, np.ndarray]:
    """Z-score both sets with the mean and std of the reference set ``Y`` (constant features left unscaled)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"{X.shape[1]} vs {Y.shape[1]} features")
    mu = Y.mean(axis=0)
    sd = Y.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd, (Y - mu) / sd


def mmd(X, Y, bandwidth: float | None = None) -> float:
    """Unbiased MMD^2 with an RBF kernel on already-scaled features (see ``standardize``).

    ``bandwidth`` defaults to the median heuristic over X and Y pooled.
    Returns max(MMD^2, 0): the unbiased estimator is slightly negative for
    samples drawn from the same distribution.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"{X.shape[1]} vs {Y.shape[1]} features")
    if len(X) < 2 or len(Y) < 2:
        raise EmptyDistribution("MMD needs at least two samples per set")
    sigma = median_bandwidth(np.vstack([X, Y])) if bandwidth is None else float(bandwidth)
    if sigma == 0:
        return 0.0  # every point identical
    g = 1.0 / (2.0 * sigma * sigma)
    kxx = np.exp(-g * _sq_dists(X, X))
    kyy = np.exp(-g * _sq_dists(Y, Y))
    kxy = np.exp(-g * _sq_dists(X, Y))
    m, n = len(X), len(Y)
    sxx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    syy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    value = float(sxx + syy - 2.0 * kxy.mean())
    return max(value, 0.0)


# --------------------------------------------------------------------------
# Frechet distance


def _psd_sqrt(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh((S + S.T) / 2.0)
    tol = PSD_TOL * max(1.0, float(np.abs(w).max()) if w.size else 1.0)
    if w.size and w.min() < -tol:
        raise NonPsdCovariance(f"covariance has eigenvalue {w.min():.3g}")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def frechet_from_moments(mu1, S1, mu2, S2) -> float:
    """||mu1-mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))."""
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
    S1 = np.atleast_2d(np.asarray(S1, dtype=float))
    S2 = np.atleast_2d(np.asarray(S2, dtype=float))
    if mu1.shape != mu2.shape or S1.shape != S2.shape or S1.shape != (mu1.size, mu1.size):
        raise DimensionMismatch("mean/covariance shapes disagree")
    r1 = _psd_sqrt(S1)
    M = r1 @ S2 @ r1
    w = np.linalg.eigvalsh((M + M.T) / 2.0)
    tol = PSD_TOL * max(1.0, float(np.abs(w).max()))
    if w.min() < -tol:
        raise NonPsdCovariance(f"product has eigenvalue {w.min():.3g}")
    tr_sqrt = math.fsum(np.sqrt(np.clip(w, 0.0, None)))
    diff = mu1 - mu2
    value = float(diff @ diff) + float(np.trace(S1)) + float(np.trace(S2)) - 2.0 * tr_sqrt
    return max(value, 0.0)


def moments(X) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) < 2:
        raise EmptyDistribution("need at least two embeddings")
    return X.mean(axis=0), np.atleast_2d(np.cov(X, rowvar=False))


def frechet_distance(X, Y) -> float:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"{X.shape[1]} vs {Y.shape[1]} dimensions")
    return frechet_from_moments(*moments(X), *moments(Y))
