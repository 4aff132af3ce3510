"""Structure identity: crystal-graph WL hashing and a tolerance-based matcher."""

from __future__ import annotations

import hashlib
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import elements
from .errors import DegenerateCell, ProviderFailure
from .structure import Lattice, Structure, lattice_from_params, lattice_params
from .symmetry import FallbackProvider, SymmetryProvider

BOND_FACTOR = 1.2
WL_ITERATIONS = 3


@dataclass(frozen=True)
class CrystalGraph:
    """Periodic multigraph: ``neighbors[i]`` lists (j, multiplicity) pairs.

    Multiplicity counts distinct periodic images of j bonded to i, so a site
    bonded to its own images appears in its own neighbour list.
    """

    labels: tuple[str, ...]
    neighbors: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    @property
    def num_edges(self) -> int:
        return sum(m for nb in self.neighbors for _, m in nb) // 2

    def degree(self, i: int) -> int:
        return sum(m for _, m in self.neighbors[i])

    @classmethod
    def from_edges(cls, labels, edges) -> CrystalGraph:
        """Build an undirected graph from (i, j) pairs; repeated pairs add multiplicity."""
        acc: list[Counter] = [Counter() for _ in labels]
        for i, j in edges:
            acc[i][j] += 1
            acc[j][i] += 1
        return cls(tuple(labels), tuple(tuple(sorted(c.items())) for c in acc))


def _image_range(inv_matrix: np.ndarray, cutoff: float) -> np.ndarray:
    # |frac component of a cartesian vector of length r| <= r * |column k of inv(B)|
    reach = np.ceil(cutoff * np.linalg.norm(inv_matrix, axis=0)).astype(int) + 1
    axes = [np.arange(-r, r + 1) for r in reach]
    return np.array(list(itertools.product(*axes)), dtype=float)


def crystal_graph(s: Structure, factor: float = BOND_FACTOR) -> CrystalGraph:
    """Bond graph with edges where distance <= factor * (r_cov,i + r_cov,j)."""
    lat, frac = s.reduced_cell
    B = lat.matrix
    radii = np.array([elements.element(el).covalent_radius for el in s.species])
    cut = factor * (radii[:, None] + radii[None, :])
    images = _image_range(lat.inv_matrix, float(cut.max()))
    n = len(frac)
    d = frac[None, :, :] - frac[:, None, :]  # d[i, j] = f_j - f_i
    cart = d @ B
    img = images @ B
    neighbors = []
    zero = np.all(images == 0, axis=1)
    for i in range(n):
        vec = cart[i][:, None, :] + img[None, :, :]
        dist = np.sqrt(np.einsum("jkx,jkx->jk", vec, vec))
        bonded = dist <= cut[i][:, None] + 1e-9
        bonded[i, zero] = False
        counts = bonded.sum(axis=1)
        neighbors.append(tuple((j, int(counts[j])) for j in range(n) if counts[j]))
    return CrystalGraph(tuple(s.species), tuple(neighbors))


def _digest(text: str) -> str:
    return hashlib.blake2b(text.encode(), digest_size=16).hexdigest()


def wl_hash(graph: CrystalGraph, iterations: int = WL_ITERATIONS) -> str:
    """Weisfeiler-Lehman hash of a labelled multigraph.

    The final label multiset is divided by the gcd of its counts, which makes
    the hash identical for a periodic structure and any of its supercells.
    """
    labels = list(graph.labels)
    for _ in range(iterations):
        new = []
        for i, nb in enumerate(graph.neighbors):
            # aggregate by label so that a bond split across several supercell sites counts the same
            acc: Counter = Counter()
            for j, m in nb:
                acc[labels[j]] += m
            ms = ",".join(f"{lab}*{m}" for lab, m in sorted(acc.items()))
            new.append(_digest(labels[i] + "|" + ms))
        labels = new
    counts = Counter(labels)
    g = reduce(math.gcd, counts.values(), 0) or 1
    body = ";".join(f"{lab}:{c // g}" for lab, c in sorted(counts.items()))
    return _digest(body)


@dataclass(frozen=True, order=True)
class Fingerprint:
    value: str

    def __str__(self):
        return self.value


def fingerprint(
    s: Structure,
    provider: SymmetryProvider | None = None,
    symprec: float = 0.01,
) -> Fingerprint:
    provider = provider or FallbackProvider()
    try:
        sg = int(provider.space_group(s, symprec))
    except ProviderFailure:
        sg = 0
    return Fingerprint(f"{s.composition.reduced_formula}_{sg}_{wl_hash(crystal_graph(s))}")


# --------------------------------------------------------------------------
# structure matcher


@dataclass(frozen=True)
class MatchTolerances:
    ltol: float = 0.2
    stol: float = 0.3
    angle_tol: float = 5.0

    def __post_init__(self):
        if min(self.ltol, self.stol, self.angle_tol) <= 0:
            raise ValueError("match tolerances must be positive")


_UVECS = np.array([u for u in itertools.product((-1, 0, 1), repeat=3) if any(u)], dtype=float)
_SHELL = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=float)


def _angle(u, v) -> float:
    c = float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def _lattice_mappings(B1: np.ndarray, B2: np.ndarray, tol: MatchTolerances) -> list[np.ndarray]:
    """Integer matrices M (entries in {-1,0,1}, det +1) with M @ B2 matching B1 within tolerance."""
    vecs = _UVECS @ B2
    lens = np.linalg.norm(vecs, axis=1)
    target = np.linalg.norm(B1, axis=1)
    cands = []
    for k in range(3):
        ratio = np.maximum(lens, target[k]) / np.minimum(lens, target[k])
        cands.append(np.flatnonzero(ratio - 1.0 <= tol.ltol + 1e-12))
    angles1 = (_angle(B1[1], B1[2]), _angle(B1[0], B1[2]), _angle(B1[0], B1[1]))
    out = []
    for i in cands[0]:
        for j in cands[1]:
            if abs(_angle(vecs[i], vecs[j]) - angles1[2]) > tol.angle_tol:
                continue
            for k in cands[2]:
                if abs(_angle(vecs[i], vecs[k]) - angles1[1]) > tol.angle_tol:
                    continue
                if abs(_angle(vecs[j], vecs[k]) - angles1[0]) > tol.angle_tol:
                    continue
                M = np.array([_UVECS[i], _UVECS[j], _UVECS[k]])
                if round(np.linalg.det(M)) == 1:
                    out.append(M)
    return out


def _greedy_max_displacement(f1, f2, species, B, limit) -> float:
    """Max displacement of a greedy same-element bijection (inf if it exceeds ``limit``)."""
    worst = 0.0
    for el in sorted(set(species)):
        idx = np.flatnonzero(species == el)
        d = f2[idx][None, :, :] - f1[idx][:, None, :]
        d -= np.round(d)
        cart = (d[:, :, None, :] + _SHELL[None, None, :, :]) @ B
        dist = np.sqrt(np.einsum("abkx,abkx->abk", cart, cart)).min(axis=2)
        order = np.argsort(dist, axis=None, kind="stable")
        used1 = np.zeros(len(idx), bool)
        used2 = np.zeros(len(idx), bool)
        left = len(idx)
        for flat in order:
            a, b = divmod(int(flat), len(idx))
            if used1[a] or used2[b]:
                continue
            used1[a] = used2[b] = True
            worst = max(worst, float(dist[a, b]))
            if worst > limit:
                return math.inf
            left -= 1
            if not left:
                break
    return worst


def _match_one_way(s1: Structure, s2: Structure, tol: MatchTolerances) -> bool:
    L1, f1 = s1.reduced_cell
    L2, f2 = s2.reduced_cell
    B1 = L1.matrix
    n = len(f1)
    limit = tol.stol * ((L1.volume + L2.volume) / 2.0 / n) ** (1.0 / 3.0)
    sp1 = np.array(s1.species)
    sp2 = np.array(s2.species)
    counts = Counter(s1.species)
    rare = min(counts, key=lambda el: (counts[el], elements.electronegativity_key(el)))
    anchor = int(np.flatnonzero(sp1 == rare)[0])
    for M in _lattice_mappings(B1, L2.matrix, tol):
        B2 = M @ L2.matrix
        g = f2 @ np.rint(np.linalg.inv(M))
        # M @ L2 may be a rotated copy of B1, so average cell parameters rather than matrices
        p1, p2 = lattice_params(L1), lattice_params(Lattice(B2, validate=False))
        try:
            Bavg = lattice_from_params(*((x + y) / 2.0 for x, y in zip(p1, p2))).matrix
        except DegenerateCell:
            continue
        for j in np.flatnonzero(sp2 == rare):
            shifted = g + (f1[anchor] - g[j])
            aligned = np.empty_like(shifted)
            # place s2 sites into slots with the same element as s1's ordering
            for el in counts:
                aligned[sp1 == el] = shifted[sp2 == el]
            if _greedy_max_displacement(f1, aligned, sp1, Bavg, limit) <= limit:
                return True
    return False


def match_structures(s1: Structure, s2: Structure, tol: MatchTolerances = MatchTolerances()) -> bool:
    """Composition-gated equivalence test; symmetric by construction."""
    if s1.composition.reduced_formula != s2.composition.reduced_formula:
        return False
    if len(s1) != len(s2):
        return False
    return _match_one_way(s1, s2, tol) or _match_one_way(s2, s1, tol)
