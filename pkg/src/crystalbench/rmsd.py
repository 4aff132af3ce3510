"""Displacement RMSD between paired structures before and after relaxation."""

from __future__ import annotations

import itertools
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import SiteCountMismatch, SpeciesMismatch
from .hull import mean_std
from .structure import Structure, niggli_transform

_SHELL = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=float)


@dataclass(frozen=True)
class RelaxPair:
    before: Structure
    after: Structure
    column: str = "default"


def _min_image_lengths(dfrac: np.ndarray, lattice) -> np.ndarray:
    # work in the Niggli basis so that one shell of images is enough
    basis, T = niggli_transform(lattice)
    d = dfrac @ np.rint(np.linalg.inv(T.astype(float)))
    d -= np.round(d)
    cart = (d[:, None, :] + _SHELL[None, :, :]) @ basis
    return np.sqrt(np.einsum("nkx,nkx->nk", cart, cart).min(axis=1))


def paired_rmsd(p: RelaxPair) -> float:
    """sqrt(mean |r_i(after) - r_i(before)|^2), minimum image on the after lattice, sites paired by index."""
    if len(p.before) != len(p.after):
        raise SiteCountMismatch(f"{len(p.before)} vs {len(p.after)} sites")
    if tuple(p.before.species) != tuple(p.after.species):
        raise SpeciesMismatch("species sequences differ")
    d = _min_image_lengths(p.after.frac_coords - p.before.frac_coords, p.after.lattice)
    return math.sqrt(math.fsum(d * d) / len(d))


@dataclass(frozen=True)
class RmsdSummary:
    per_structure: Mapping[str, tuple[float, float | None]]
    corpus_mean: float | None
    corpus_std: float | None

    def to_dict(self) -> dict:
        return {
            "mean": self.corpus_mean,
            "std": self.corpus_std,
            "per_structure": {k: {"mean": m, "std": s} for k, (m, s) in self.per_structure.items()},
        }


def rmsd_ensemble(values: Mapping[str, Mapping[str, float] | Sequence[float]]) -> RmsdSummary:
    """Per-structure mean/std over energy models, then corpus mean/std of the per-structure means."""
    per = {}
    for sid, cols in values.items():
        vals = list(cols.values()) if isinstance(cols, Mapping) else list(cols)
        if not vals:
            continue
        per[sid] = mean_std(vals)
    means = [m for m, _ in per.values()]
    cm, cs = mean_std(means)
    return RmsdSummary(per, cm, cs)
