"""Pluggable space-group providers.

The default :class:`FallbackProvider` does no symmetry analysis: it trusts a
declared International Tables number from the structure metadata and otherwise
reports P1 for any well-formed cell. :class:`SpglibProvider` performs a real
analysis when the optional ``spglib`` package is installed.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from . import elements
from .errors import ProviderFailure
from .structure import Structure


class SymmetryProvider(Protocol):
    name: str

    def space_group(self, s: Structure, symprec: float) -> int:
        """Return the space-group number (1..230) or raise ProviderFailure."""


def _declared_number(s: Structure) -> int | None:
    raw = s.meta.get("spacegroup_number")
    if raw is None:
        return None
    try:
        value = int(float(raw))
    except ValueError:
        return None
    return value if 1 <= value <= 230 else None


class FallbackProvider:
    name = "fallback"

    def space_group(self, s: Structure, symprec: float) -> int:
        if s.lattice.is_degenerate:
            raise ProviderFailure("degenerate cell")
        if not np.all(np.isfinite(s.frac_coords)):
            raise ProviderFailure("non-finite coordinates")
        declared = _declared_number(s)
        return declared if declared is not None else 1


class SpglibProvider:
    name = "spglib"

    def __init__(self):
        try:
            import spglib
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise ProviderFailure("spglib is not installed") from exc
        self._spglib = spglib

    def space_group(self, s: Structure, symprec: float) -> int:
        if s.lattice.is_degenerate:
            raise ProviderFailure("degenerate cell")
        cell = (
            np.asarray(s.lattice.matrix),
            np.asarray(s.frac_coords),
            [elements.element(el).Z for el in s.species],
        )
        data = self._spglib.get_symmetry_dataset(cell, symprec=symprec)
        if data is None:
            raise ProviderFailure("spglib could not determine the space group")
        number = int(data.number if hasattr(data, "number") else data["number"])
        if not 1 <= number <= 230:
            raise ProviderFailure(f"spglib returned space group {number}")
        return number


def get_provider(name: str = "fallback") -> SymmetryProvider:
    if name == "fallback":
        return FallbackProvider()
    if name == "spglib":
        return SpglibProvider()
    raise ValueError(f"unknown symmetry provider {name!r}")
