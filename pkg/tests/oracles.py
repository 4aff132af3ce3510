"""Independent reference computations used by the unit and acceptance tests."""

from __future__ import annotations

import itertools
import math

import numpy as np

from crystalbench.hull import ReferenceEntry
from crystalbench.structure import Composition


def support_set_lp(c: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """min c @ x s.t. A x = b, x >= 0 for every column b of ``B``, by enumerating square supports.

    An optimum of a bounded feasible LP is attained at a basic feasible solution;
    with full row rank every basic solution has a support of exactly ``m`` columns.
    Returns inf for right-hand sides with no non-negative basic solution.
    """
    m, n = A.shape
    B = np.atleast_2d(B.T).T.reshape(m, -1)
    subsets = np.array(list(itertools.combinations(range(n), m)))
    mats = A[:, subsets].transpose(1, 0, 2)  # (S, m, m)
    ok = np.abs(np.linalg.det(mats)) > 1e-10
    subsets, mats = subsets[ok], mats[ok]
    x = np.linalg.solve(mats, np.broadcast_to(B, (len(mats),) + B.shape))  # (S, m, K)
    feasible = np.all(x >= -1e-12, axis=1)
    obj = np.einsum("sm,smk->sk", c[subsets], x)
    obj = np.where(feasible, obj, np.inf)
    return obj.min(axis=0)


def random_phase_diagram(rng: np.random.Generator, pool: list[str], n_entries: int, n_elements: int):
    """Elemental entries for every element plus random compounds; energies in [-2, 1] eV/atom."""
    els = sorted(rng.choice(pool, size=n_elements, replace=False).tolist())
    entries = [ReferenceEntry(f"el-{el}", Composition({el: 1}), {"e": float(rng.uniform(-2, 1))}) for el in els]
    while len(entries) < n_entries:
        k = int(rng.integers(2, n_elements + 1))
        sub = rng.choice(els, size=k, replace=False)
        comp = Composition({el: int(rng.integers(1, 5)) for el in sub})
        entries.append(ReferenceEntry(f"c{len(entries)}", comp, {"e": float(rng.uniform(-2, 1))}))
    return els, entries


def random_candidate(rng: np.random.Generator, els: list[str]) -> Composition:
    k = int(rng.integers(1, len(els) + 1))
    sub = rng.choice(els, size=k, replace=False)
    return Composition({el: int(rng.integers(1, 7)) for el in sub})


def brute_force_hull(entries, els: list[str], candidates: list[Composition]) -> np.ndarray:
    """Hull energy of each candidate over the full element set via support enumeration."""
    A = np.array([[e.composition.fraction(el) for el in els] for e in entries]).T
    c = np.array([e.energy_per_atom["e"] for e in entries])
    B = np.array([[cand.fraction(el) for el in els] for cand in candidates]).T
    return support_set_lp(c, A, B)


def min_image_oracle(s, reach: int = 3) -> float:
    """Minimum distance scanning lattice translations l in {-reach..reach}^3 on the cell as given."""
    B = s.lattice.matrix
    r = np.arange(-reach, reach + 1)
    grid = np.array(np.meshgrid(r, r, r, indexing="ij")).reshape(3, -1).T.astype(float)
    nonzero = np.any(grid != 0, axis=1)
    frac = s.frac_coords
    best = math.inf
    n = len(frac)
    for i in range(n):
        for j in range(i, n):
            d = np.linalg.norm((frac[j] - frac[i] + grid) @ B, axis=1)
            best = min(best, float((d[nonzero] if i == j else d).min()))
    return best
