"""A small CIF reader/writer covering what materials toolchains usually emit.

Supported: cell lengths and angles, a symmetry-operator loop (xyz strings),
the atom_site loop with fractional coordinates and optional occupancy, and the
International Tables space-group number. Everything else is ignored.
"""

from __future__ import annotations

import re
from fractions import Fraction

import numpy as np

from . import elements
from .errors import MalformedCif, MissingAtomSites, MissingCellParameters, UnknownElement
from .structure import Lattice, Structure, lattice_from_params, lattice_params

DEDUP_TOL = 1e-3  # Angstrom, for symmetry-expanded sites

_SYMOP_TAGS = (
    "_symmetry_equiv_pos_as_xyz",
    "_space_group_symop_operation_xyz",
    "_space_group_symop.operation_xyz",
)
_SG_TAGS = ("_symmetry_int_tables_number", "_space_group_it_number", "_space_group.it_number")


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith(";"):
            # semicolon-delimited text field
            buf = [line[1:]]
            i += 1
            while i < len(lines) and not lines[i].startswith(";"):
                buf.append(lines[i])
                i += 1
            if i == len(lines):
                raise MalformedCif("unterminated semicolon text field")
            tokens.append("\n".join(buf).strip())
            i += 1
            continue
        pos = 0
        n = len(line)
        while pos < n:
            ch = line[pos]
            if ch.isspace():
                pos += 1
            elif ch == "#":
                break
            elif ch in "'\"":
                # a quote only closes when followed by whitespace or end of line
                end = pos + 1
                while True:
                    end = line.find(ch, end)
                    if end == -1:
                        raise MalformedCif(f"unterminated quoted string on line {i + 1}")
                    if end + 1 == n or line[end + 1].isspace():
                        break
                    end += 1
                tokens.append(line[pos + 1:end])
                pos = end + 1
            else:
                end = pos
                while end < n and not line[end].isspace():
                    end += 1
                tokens.append(line[pos:end])
                pos = end
        i += 1
    return tokens


def _parse_blocks(tokens: list[str]) -> tuple[dict[str, str], list[dict[str, list[str]]]]:
    """Return (tag -> value, loops) for the first data block."""
    items: dict[str, str] = {}
    loops: list[dict[str, list[str]]] = []
    i = 0
    n = len(tokens)
    seen_block = False
    while i < n:
        tok = tokens[i]
        low = tok.lower()
        if low.startswith("data_"):
            if seen_block:
                break
            seen_block = True
            i += 1
        elif low == "loop_":
            i += 1
            tags = []
            while i < n and tokens[i].startswith("_"):
                tags.append(tokens[i].lower())
                i += 1
            if not tags:
                raise MalformedCif("loop_ without tags")
            values = []
            while i < n and not tokens[i].startswith("_") and tokens[i].lower() not in ("loop_",) \
                    and not tokens[i].lower().startswith("data_"):
                values.append(tokens[i])
                i += 1
            if len(values) % len(tags):
                raise MalformedCif(f"loop with {len(tags)} columns has {len(values)} values")
            loops.append({t: values[k::len(tags)] for k, t in enumerate(tags)})
        elif tok.startswith("_"):
            if i + 1 >= n:
                raise MalformedCif(f"tag {tok} has no value")
            items[low] = tokens[i + 1]
            i += 2
        else:
            raise MalformedCif(f"unexpected token {tok!r}")
    if not seen_block:
        raise MalformedCif("no data_ block")
    return items, loops


def _number(s: str) -> float:
    # strip standard uncertainty: 5.6402(3) -> 5.6402
    s = re.sub(r"\(\d+\)$", "", s.strip())
    return float(s)


_TERM = re.compile(r"([+-]?)([^+-]+)")


def parse_symop(op: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse 'x,y,z'-style operator into (R, t) acting on column fractional vectors."""
    parts = op.replace(" ", "").lower().split(",")
    if len(parts) != 3:
        raise MalformedCif(f"bad symmetry operator {op!r}")
    R = np.zeros((3, 3))
    t = np.zeros(3)
    for row, expr in enumerate(parts):
        if not expr:
            raise MalformedCif(f"bad symmetry operator {op!r}")
        for sign, body in _TERM.findall(expr):
            sgn = -1.0 if sign == "-" else 1.0
            var = body[-1] if body[-1] in "xyz" else None
            coef = body[:-1].rstrip("*") if var else body
            try:
                value = float(Fraction(coef)) if coef else 1.0
            except (ValueError, ZeroDivisionError):
                raise MalformedCif(f"bad symmetry operator {op!r}") from None
            if var:
                R[row, "xyz".index(var)] += sgn * value
            else:
                t[row] += sgn * value
    return R, t


def _element_from(symbol: str) -> str:
    # type symbols and labels: 'Fe2+', 'Na1', 'O', 'Cl12'
    m = re.match(r"([A-Z])([a-z]?)", symbol.strip())
    if m:
        for cand in (m.group(1) + m.group(2), m.group(1)):
            if elements.is_element(cand):
                return cand
    raise UnknownElement(f"unknown element in {symbol!r}")


def parse_cif(text: str) -> Structure:
    tokens = _tokenize(text)
    items, loops = _parse_blocks(tokens)

    try:
        params = [
            _number(items[k])
            for k in (
                "_cell_length_a", "_cell_length_b", "_cell_length_c",
                "_cell_angle_alpha", "_cell_angle_beta", "_cell_angle_gamma",
            )
        ]
    except KeyError as exc:
        raise MissingCellParameters(f"missing {exc.args[0]}") from None
    except ValueError as exc:
        raise MalformedCif(f"bad cell parameter: {exc}") from None
    lattice = lattice_from_params(*params)

    meta = {}
    for tag in _SG_TAGS:
        if tag in items:
            meta["spacegroup_number"] = items[tag]
            break

    ops = [(np.eye(3), np.zeros(3))]
    for loop in loops:
        for tag in _SYMOP_TAGS:
            if tag in loop:
                ops = [parse_symop(op) for op in loop[tag]]
                break
    for tag in _SYMOP_TAGS:
        if tag in items:
            ops = [parse_symop(items[tag])]

    site_loop = next((lp for lp in loops if "_atom_site_fract_x" in lp), None)
    if site_loop is None:
        raise MissingAtomSites("no atom_site loop with fractional coordinates")
    symbols = site_loop.get("_atom_site_type_symbol") or site_loop.get("_atom_site_label")
    if symbols is None:
        raise MissingAtomSites("atom_site loop has neither type_symbol nor label")
    try:
        coords = np.array(
            [[_number(x), _number(y), _number(z)] for x, y, z in zip(
                site_loop["_atom_site_fract_x"], site_loop["_atom_site_fract_y"], site_loop["_atom_site_fract_z"]
            )]
        )
        occ = [_number(o) if o not in ("?", ".") else 1.0
               for o in site_loop.get("_atom_site_occupancy", ["1"] * len(symbols))]
    except (KeyError, ValueError) as exc:
        raise MissingAtomSites(f"bad atom_site loop: {exc}") from None
    if len(coords) == 0:
        raise MissingAtomSites("atom_site loop is empty")
    species = [_element_from(s) for s in symbols]

    B = lattice.matrix
    out_species: list[str] = []
    out_frac: list[np.ndarray] = []
    out_occ: list[float] = []
    for el, f, o in zip(species, coords, occ):
        for R, t in ops:
            g = R @ f + t
            g = g - np.floor(g)
            dup = False
            for el2, f2 in zip(out_species, out_frac):
                if el2 != el:
                    continue
                d = g - f2
                d -= np.round(d)
                if np.linalg.norm(d @ B) < DEDUP_TOL:
                    dup = True
                    break
            if not dup:
                out_species.append(el)
                out_frac.append(g)
                out_occ.append(min(float(o), 1.0))
    return Structure(lattice, out_species, np.array(out_frac), out_occ, meta)


def write_cif(s: Structure, data_name: str | None = None) -> str:
    """Serialize as a P1 CIF (all sites explicit)."""
    a, b, c, al, be, ga = lattice_params(s.lattice)
    name = data_name or s.id or s.composition.reduced_formula
    lines = [
        f"data_{name}",
        f"_cell_length_a {a:.10f}",
        f"_cell_length_b {b:.10f}",
        f"_cell_length_c {c:.10f}",
        f"_cell_angle_alpha {al:.10f}",
        f"_cell_angle_beta {be:.10f}",
        f"_cell_angle_gamma {ga:.10f}",
    ]
    if "spacegroup_number" in s.meta:
        lines.append(f"_symmetry_Int_Tables_number {s.meta['spacegroup_number']}")
    lines += [
        "loop_",
        "_symmetry_equiv_pos_as_xyz",
        "'x, y, z'",
        "loop_",
        "_atom_site_label",
        "_atom_site_type_symbol",
        "_atom_site_fract_x",
        "_atom_site_fract_y",
        "_atom_site_fract_z",
        "_atom_site_occupancy",
    ]
    for k, (el, f, o) in enumerate(zip(s.species, s.frac_coords, s.occupancy)):
        lines.append(f"{el}{k} {el} {f[0]:.10f} {f[1]:.10f} {f[2]:.10f} {o:.6f}")
    return "\n".join(lines) + "\n"

