"""Crystal structure data model and periodic geometry.

Conventions: lattice vectors are the *rows* of a 3x3 matrix, so Cartesian
positions are ``frac @ lattice.matrix``. Fractional coordinates are wrapped
into [0, 1) when a Structure is built.
"""

from __future__ import annotations

import math
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from functools import cached_property, reduce
from types import MappingProxyType

import numpy as np

from . import elements
from .errors import DegenerateCell, NonConvergence, SchemaError, UnknownElement

AMU_PER_A3_TO_G_PER_CM3 = 1.66053906660

_MIN_VOLUME = 1e-8


class Lattice:
    """Three lattice vectors (rows of ``matrix``), in Angstrom."""

    __slots__ = ("_matrix", "__dict__")

    def __init__(self, matrix, *, validate: bool = True):
        m = np.array(matrix, dtype=float).reshape(3, 3)
        m.setflags(write=False)
        if validate:
            if not np.all(np.isfinite(m)):
                raise DegenerateCell("lattice has non-finite entries")
            det = float(np.linalg.det(m))
            if det <= _MIN_VOLUME:
                raise DegenerateCell(f"lattice determinant {det:.3g} is not positive")
        self._matrix = m

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @cached_property
    def volume(self) -> float:
        return float(np.linalg.det(self._matrix))

    @cached_property
    def inv_matrix(self) -> np.ndarray:
        return np.linalg.inv(self._matrix)

    @property
    def lengths(self) -> tuple[float, float, float]:
        return lattice_params(self)[:3]

    @property
    def angles(self) -> tuple[float, float, float]:
        return lattice_params(self)[3:]

    @property
    def is_degenerate(self) -> bool:
        return not np.all(np.isfinite(self._matrix)) or abs(self.volume) <= _MIN_VOLUME

    @classmethod
    def cubic(cls, a: float) -> Lattice:
        return cls(np.eye(3) * a)

    def __repr__(self):
        a, b, c, al, be, ga = lattice_params(self)
        return f"Lattice(a={a:.4f}, b={b:.4f}, c={c:.4f}, alpha={al:.2f}, beta={be:.2f}, gamma={ga:.2f})"

    def __eq__(self, other):
        return isinstance(other, Lattice) and np.array_equal(self._matrix, other._matrix)

    def __hash__(self):
        return hash(self._matrix.tobytes())


def lattice_params(lattice: Lattice) -> tuple[float, float, float, float, float, float]:
    """Return (a, b, c, alpha, beta, gamma) with angles in degrees."""
    m = lattice.matrix
    a, b, c = (float(np.linalg.norm(v)) for v in m)

    def angle(u, v, lu, lv):
        cosv = float(np.dot(u, v)) / (lu * lv)
        return math.degrees(math.acos(max(-1.0, min(1.0, cosv))))

    return (
        a, b, c,
        angle(m[1], m[2], b, c),
        angle(m[0], m[2], a, c),
        angle(m[0], m[1], a, b),
    )


def lattice_from_params(a, b, c, alpha, beta, gamma) -> Lattice:
    """Build a lattice with a along x and b in the xy-plane."""
    if min(a, b, c) <= 0:
        raise DegenerateCell("cell lengths must be positive")
    if not all(0 < ang < 180 for ang in (alpha, beta, gamma)):
        raise DegenerateCell("cell angles must lie in (0, 180)")
    ca, cb, cg = (math.cos(math.radians(x)) for x in (alpha, beta, gamma))
    sg = math.sin(math.radians(gamma))
    disc = 1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg
    if disc <= 1e-12:
        raise DegenerateCell(f"angles ({alpha}, {beta}, {gamma}) do not form a valid cell")
    cy = (ca - cb * cg) / sg
    cz = math.sqrt(max(1.0 - cb * cb - cy * cy, 0.0))
    return Lattice([
        [a, 0.0, 0.0],
        [b * cg, b * sg, 0.0],
        [c * cb, c * cy, c * cz],
    ])


# --------------------------------------------------------------------------
# Niggli reduction


def _size_reduce(basis: np.ndarray, T: np.ndarray, max_rounds: int = 200):
    """Greedy pairwise length reduction; makes Krivy-Gruber converge fast on skewed input."""
    for _ in range(max_rounds):
        changed = False
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                bj2 = float(basis[j] @ basis[j])
                k = round(float(basis[i] @ basis[j]) / bj2)
                if k != 0:
                    basis[i] = basis[i] - k * basis[j]
                    T[i] = T[i] - k * T[j]
                    changed = True
        if not changed:
            return basis, T
    return basis, T


def niggli_transform(lattice: Lattice, tol: float = 1e-5, max_iter: int = 100):
    """Krivy-Gruber reduction. Returns (reduced matrix, integer T) with reduced = T @ original."""
    basis = lattice.matrix.copy()
    T = np.eye(3, dtype=np.int64)
    basis, T = _size_reduce(basis, T)
    vol = abs(float(np.linalg.det(basis)))
    e = tol * vol ** (2.0 / 3.0)

    def apply(M):
        nonlocal basis, T
        M = np.asarray(M, dtype=np.int64)
        T = M.T @ T
        basis = T @ lattice.matrix

    basis = T @ lattice.matrix
    for _ in range(max_iter):
        G = basis @ basis.T
        A, B, C = G[0, 0], G[1, 1], G[2, 2]
        E, N, Y = 2 * G[1, 2], 2 * G[0, 2], 2 * G[0, 1]
        # A1
        if B + e < A or (abs(A - B) < e and abs(E) > abs(N) + e):
            apply([[0, -1, 0], [-1, 0, 0], [0, 0, -1]])
            G = basis @ basis.T
            A, B, C = G[0, 0], G[1, 1], G[2, 2]
            E, N, Y = 2 * G[1, 2], 2 * G[0, 2], 2 * G[0, 1]
        # A2
        if C + e < B or (abs(B - C) < e and abs(N) > abs(Y) + e):
            apply([[-1, 0, 0], [0, 0, -1], [0, -1, 0]])
            continue
        l = 0 if abs(E) < e else int(np.sign(E))
        m = 0 if abs(N) < e else int(np.sign(N))
        n = 0 if abs(Y) < e else int(np.sign(Y))
        if l * m * n == 1:
            # A3
            apply(np.diag([-1 if l == -1 else 1, -1 if m == -1 else 1, -1 if n == -1 else 1]))
        else:
            # A4
            i, j, k = (-1 if l == 1 else 1), (-1 if m == 1 else 1), (-1 if n == 1 else 1)
            if i * j * k == -1:
                if n == 0:
                    k = -1
                elif m == 0:
                    j = -1
                elif l == 0:
                    i = -1
            if (i, j, k) != (1, 1, 1):
                apply(np.diag([i, j, k]))
        G = basis @ basis.T
        A, B, C = G[0, 0], G[1, 1], G[2, 2]
        E, N, Y = 2 * G[1, 2], 2 * G[0, 2], 2 * G[0, 1]
        # A5
        if abs(E) > B + e or (abs(E - B) < e and 2 * N < Y - e) or (abs(E + B) < e and Y < -e):
            apply([[1, 0, 0], [0, 1, -int(np.sign(E))], [0, 0, 1]])
            continue
        # A6
        if abs(N) > A + e or (abs(A - N) < e and 2 * E < Y - e) or (abs(A + N) < e and Y < -e):
            apply([[1, 0, -int(np.sign(N))], [0, 1, 0], [0, 0, 1]])
            continue
        # A7
        if abs(Y) > A + e or (abs(A - Y) < e and 2 * E < N - e) or (abs(A + Y) < e and N < -e):
            apply([[1, -int(np.sign(Y)), 0], [0, 1, 0], [0, 0, 1]])
            continue
        # A8
        s = E + N + Y + A + B
        if s < -e or (abs(s) < e and 2 * (A + N) + Y > e):
            apply([[1, 0, 1], [0, 1, 1], [0, 0, 1]])
            continue
        return basis, T
    raise NonConvergence(f"Niggli reduction did not converge in {max_iter} iterations")


def niggli_reduce(lattice: Lattice, tol: float = 1e-5) -> Lattice:
    basis, _ = niggli_transform(lattice, tol)
    return Lattice(basis)


def is_niggli_reduced(lattice: Lattice, tol: float = 1e-5) -> bool:
    """Check the main and special Niggli conditions on the Gram matrix."""
    G = lattice.matrix @ lattice.matrix.T
    e = tol * abs(lattice.volume) ** (2.0 / 3.0)
    A, B, C = G[0, 0], G[1, 1], G[2, 2]
    xi, eta, zeta = 2 * G[1, 2], 2 * G[0, 2], 2 * G[0, 1]
    if A > B + e or B > C + e:
        return False
    if abs(xi) > B + e or abs(eta) > A + e or abs(zeta) > A + e:
        return False
    pos = [x > e for x in (xi, eta, zeta)]
    nonpos = [x <= e for x in (xi, eta, zeta)]
    if not (all(pos) or all(nonpos)):
        return False
    if all(nonpos) and not all(pos):
        if -(xi + eta + zeta) > A + B + e:
            return False
    return True


# --------------------------------------------------------------------------
# Composition


_FORMULA_TOKEN = re.compile(r"([A-Z][a-z]?)(\d*\.?\d*)")


class Composition(Mapping):
    """Immutable element -> amount mapping (amounts may be fractional)."""

    __slots__ = ("_items", "__dict__")

    def __init__(self, counts: Mapping[str, float] | Iterable[tuple[str, float]]):
        items = dict(counts.items() if isinstance(counts, Mapping) else counts)
        agg = {}
        for el, n in items.items():
            if not elements.is_element(el):
                raise UnknownElement(f"unknown element symbol {el!r}")
            n = float(n)
            if n < 0 or not math.isfinite(n):
                raise SchemaError(f"invalid amount {n} for {el}")
            if n > 0:
                agg[el] = agg.get(el, 0.0) + n
        self._items = tuple(sorted(agg.items(), key=lambda kv: elements.electronegativity_key(kv[0])))

    @classmethod
    def from_formula(cls, formula: str) -> Composition:
        return cls(_parse_formula(formula))

    def __getitem__(self, el):
        for k, v in self._items:
            if k == el:
                return v
        raise KeyError(el)

    def __iter__(self) -> Iterator[str]:
        return (k for k, _ in self._items)

    def __len__(self):
        return len(self._items)

    def __hash__(self):
        return hash(self._items)

    def __eq__(self, other):
        if isinstance(other, Composition):
            return self._items == other._items
        return NotImplemented

    def __repr__(self):
        return f"Composition({dict(self._items)!r})"

    @property
    def num_atoms(self) -> float:
        return math.fsum(v for _, v in self._items)

    @property
    def elements(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self._items)

    def fractions(self) -> dict[str, float]:
        total = self.num_atoms
        return {k: v / total for k, v in self._items}

    def fraction(self, el: str) -> float:
        return self.get(el, 0.0) / self.num_atoms

    @property
    def is_integer(self) -> bool:
        return all(abs(v - round(v)) < 1e-8 for _, v in self._items)

    def integer_counts(self) -> dict[str, int]:
        if not self.is_integer:
            raise ValueError("composition has fractional amounts")
        return {k: int(round(v)) for k, v in self._items}

    def reduced(self) -> Composition:
        """Divide integer amounts by their gcd; fractional compositions are returned unchanged."""
        if not self._items or not self.is_integer:
            return self
        ints = self.integer_counts()
        g = reduce(math.gcd, ints.values())
        return Composition({k: v // g for k, v in ints.items()})

    @cached_property
    def reduced_formula(self) -> str:
        return reduced_formula(self)

    @property
    def chemical_system(self) -> frozenset[str]:
        return frozenset(self)


def _parse_formula(formula: str) -> dict[str, float]:
    formula = formula.replace(" ", "")
    # expand parenthesised groups innermost-first: (SO4)2 -> S2O8
    group = re.compile(r"\(([^()]*)\)(\d*\.?\d*)")
    while "(" in formula:
        m = group.search(formula)
        if m is None:
            raise SchemaError(f"unbalanced parentheses in formula {formula!r}")
        mult = float(m.group(2)) if m.group(2) else 1.0
        inner = _parse_formula(m.group(1))
        expanded = "".join(f"{el}{n * mult:g}" for el, n in inner.items())
        formula = formula[: m.start()] + expanded + formula[m.end():]
    out: dict[str, float] = {}
    pos = 0
    for m in _FORMULA_TOKEN.finditer(formula):
        if m.start() != pos:
            raise SchemaError(f"cannot parse formula {formula!r}")
        pos = m.end()
        out[m.group(1)] = out.get(m.group(1), 0.0) + (float(m.group(2)) if m.group(2) else 1.0)
    if pos != len(formula) or not out:
        raise SchemaError(f"cannot parse formula {formula!r}")
    return out


def _fmt_amount(x: float) -> str:
    if abs(x - 1.0) < 1e-8:
        return ""
    if abs(x - round(x)) < 1e-8:
        return str(int(round(x)))
    return f"{x:.6g}"


def reduced_formula(c: Composition) -> str:
    red = c.reduced()
    return "".join(f"{el}{_fmt_amount(n)}" for el, n in red.items())


# --------------------------------------------------------------------------
# Structure


@dataclass(frozen=True)
class Site:
    element: str
    frac: tuple[float, float, float]
    occupancy: float = 1.0


class Structure:
    """Lattice plus ordered sites and string metadata. Treated as immutable."""

    def __init__(self, lattice: Lattice, species, frac_coords, occupancy=None, meta=None):
        species = tuple(species)
        frac = np.array(frac_coords, dtype=float).reshape(-1, 3)
        if len(species) != len(frac):
            raise SchemaError("species and frac_coords differ in length")
        if not species:
            raise SchemaError("structure has no sites")
        for el in set(species):
            if not elements.is_element(el):
                raise UnknownElement(f"unknown element symbol {el!r}")
        if not np.all(np.isfinite(frac)):
            raise SchemaError("non-finite fractional coordinate")
        frac = frac - np.floor(frac)
        frac[frac >= 1.0] = 0.0
        occ = np.ones(len(species)) if occupancy is None else np.array(occupancy, dtype=float)
        if occ.shape != (len(species),) or np.any(occ <= 0) or np.any(occ > 1 + 1e-9):
            raise SchemaError("occupancies must lie in (0, 1]")
        frac.setflags(write=False)
        occ.setflags(write=False)
        self.lattice = lattice
        self.species = species
        self.frac_coords = frac
        self.occupancy = occ
        self._meta = {str(k): str(v) for k, v in (meta or {}).items()}

    @classmethod
    def from_sites(cls, lattice: Lattice, sites: Iterable[Site], meta=None) -> Structure:
        sites = list(sites)
        return cls(
            lattice,
            [s.element for s in sites],
            [s.frac for s in sites],
            [s.occupancy for s in sites],
            meta,
        )

    @property
    def meta(self) -> Mapping[str, str]:
        return MappingProxyType(self._meta)

    @property
    def id(self) -> str | None:
        return self._meta.get("id")

    @property
    def sites(self) -> tuple[Site, ...]:
        return tuple(
            Site(el, tuple(float(x) for x in f), float(o))
            for el, f, o in zip(self.species, self.frac_coords, self.occupancy)
        )

    def __len__(self):
        return len(self.species)

    @property
    def num_sites(self) -> int:
        return len(self.species)

    @property
    def volume(self) -> float:
        return self.lattice.volume

    @cached_property
    def cart_coords(self) -> np.ndarray:
        return self.frac_coords @ self.lattice.matrix

    @property
    def has_partial_occupancy(self) -> bool:
        return bool(np.any(self.occupancy < 1.0 - 1e-9))

    @cached_property
    def composition(self) -> Composition:
        return composition_of(self)

    @cached_property
    def reduced_cell(self) -> tuple[Lattice, np.ndarray]:
        """Niggli-reduced lattice and the site coordinates expressed in it (wrapped to [0,1))."""
        basis, T = niggli_transform(self.lattice)
        Tinv = np.rint(np.linalg.inv(T.astype(float)))
        frac = self.frac_coords @ Tinv
        frac = frac - np.floor(frac)
        frac[frac >= 1.0] = 0.0
        return Lattice(basis), frac

    def with_meta(self, **kw) -> Structure:
        meta = dict(self._meta)
        meta.update({k: str(v) for k, v in kw.items()})
        return Structure(self.lattice, self.species, self.frac_coords, self.occupancy, meta)

    def to_dict(self) -> dict:
        d = {
            "lattice": [float(x) for x in self.lattice.matrix.ravel()],
            "species": list(self.species),
            "frac_coords": [[float(x) for x in f] for f in self.frac_coords],
        }
        if self.has_partial_occupancy:
            d["occupancy"] = [float(o) for o in self.occupancy]
        if self._meta:
            d["meta"] = dict(self._meta)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> Structure:
        try:
            m = np.array(d["lattice"], dtype=float).reshape(3, 3)
            species = list(d["species"])
            frac = np.array(d["frac_coords"], dtype=float).reshape(-1, 3)
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"bad structure record: {exc}") from None
        # a left-handed basis describes the same crystal as its negation with negated coordinates
        if np.all(np.isfinite(m)) and np.linalg.det(m) < 0:
            m, frac = -m, -frac
        meta = dict(d.get("meta") or {})
        if "id" in d and "id" not in meta:
            meta["id"] = d["id"]
        return cls(Lattice(m), species, frac, d.get("occupancy"), meta)

    def __repr__(self):
        ident = f" id={self.id}" if self.id else ""
        return f"<Structure {self.composition.reduced_formula} n={len(self)}{ident}>"


def composition_of(s: Structure) -> Composition:
    counts: dict[str, float] = {}
    for el, occ in zip(s.species, s.occupancy):
        counts[el] = counts.get(el, 0.0) + float(occ)
    return Composition(counts)


# --------------------------------------------------------------------------
# Geometry


_IMAGES_2 = np.array([(i, j, k) for i in range(-2, 3) for j in range(-2, 3) for k in range(-2, 3)], dtype=float)
_NONZERO_2 = _IMAGES_2[np.any(_IMAGES_2 != 0, axis=1)]


def min_interatomic_distance(s: Structure) -> float:
    """Smallest periodic distance between any two sites, or a site and its own image."""
    lat, frac = s.reduced_cell
    B = lat.matrix
    best = float(np.min(np.linalg.norm(_NONZERO_2 @ B, axis=1)))
    n = len(frac)
    if n > 1:
        i, j = np.triu_indices(n, k=1)
        d = frac[j] - frac[i]
        d -= np.round(d)
        cart = d @ B
        img = _IMAGES_2 @ B
        # |c + t|^2 over all pairs and images without materialising a 3-D array per axis
        sq = (
            np.einsum("ij,ij->i", cart, cart)[:, None]
            + np.einsum("ij,ij->i", img, img)[None, :]
            + 2.0 * cart @ img.T
        )
        p, k = np.unravel_index(int(np.argmin(sq)), sq.shape)
        best = min(best, float(np.linalg.norm(cart[p] + img[k])))
    return best


def mass_density(s: Structure) -> float:
    """Density in g/cm^3."""
    mass = math.fsum(elements.element(el).mass * occ for el, occ in zip(s.species, s.occupancy))
    return mass / s.volume * AMU_PER_A3_TO_G_PER_CM3


def atomic_density(s: Structure) -> float:
    """Sites per cubic Angstrom."""
    return len(s) / s.volume
