"""Readers for candidate sets and sidecar files (energies, embeddings, relaxed sets)."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cif import parse_cif
from .errors import BenchError, SchemaError
from .structure import Structure


@dataclass(frozen=True)
class Candidate:
    """One submitted structure. ``structure`` is None when the input could not be read."""

    id: str
    structure: Structure | None
    error: str | None = None


def _record_to_candidate(rec, fallback_id: str) -> Candidate:
    if not isinstance(rec, dict):
        return Candidate(fallback_id, None, "record is not an object")
    sid = str(rec.get("id") or (rec.get("meta") or {}).get("id") or fallback_id)
    try:
        if "cif" in rec:
            s = parse_cif(rec["cif"])
        else:
            s = Structure.from_dict(rec)
        s = s.with_meta(id=sid)
    except BenchError as exc:
        return Candidate(sid, None, f"{type(exc).__name__}: {exc}")
    except (ValueError, TypeError) as exc:
        return Candidate(sid, None, f"{type(exc).__name__}: {exc}")
    return Candidate(sid, s)


def _read_cif_file(path: Path) -> Candidate:
    sid = path.stem
    try:
        s = parse_cif(path.read_text())
    except (BenchError, ValueError, UnicodeDecodeError) as exc:
        return Candidate(sid, None, f"{type(exc).__name__}: {exc}")
    return Candidate(sid, s.with_meta(id=sid))


def read_candidates(paths: list[str] | str) -> list[Candidate]:
    """Read candidates from JSONL files, CIF files, or directories of CIF files.

    Unreadable entries are kept (structure None) so that they count as submitted.
    """
    if isinstance(paths, str):
        paths = [paths]
    out: list[Candidate] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            for f in sorted(path.glob("*.cif")):
                out.append(_read_cif_file(f))
        elif path.suffix.lower() == ".cif":
            out.append(_read_cif_file(path))
        else:
            with path.open() as fh:
                for n, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    fallback = f"{path.stem}:{n}"
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError as exc:
                        out.append(Candidate(fallback, None, f"JSONDecodeError: {exc}"))
                        continue
                    out.append(_record_to_candidate(rec, fallback))
    return out


def write_structures_jsonl(path: str | Path, structures, extra=None) -> None:
    with Path(path).open("w") as fh:
        for k, s in enumerate(structures):
            d = s.to_dict()
            if s.id:
                d = {"id": s.id, **d}
            if extra:
                d.update(extra[k])
            fh.write(json.dumps(d, sort_keys=False) + "\n")


def read_energies(path: str | Path) -> tuple[list[str], dict[str, dict[str, float]]]:
    """CSV keyed by ``id`` with one column per energy model. Returns (columns, id -> {column: e})."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames:
            raise SchemaError(f"{path}: energy sidecar needs an 'id' column")
        columns = [c for c in reader.fieldnames if c != "id"]
        if not columns:
            raise SchemaError(f"{path}: energy sidecar has no energy columns")
        table: dict[str, dict[str, float]] = {}
        for n, row in enumerate(reader, start=2):
            row_e = {}
            for c in columns:
                v = (row.get(c) or "").strip()
                if not v:
                    continue
                try:
                    e = float(v)
                except ValueError:
                    raise SchemaError(f"{path}:{n}: bad energy {v!r} in column {c}") from None
                if math.isfinite(e):
                    row_e[c] = e
            table[row["id"]] = row_e
    return columns, table


def read_vectors(path: str | Path) -> dict[str, np.ndarray]:
    """Embedding sidecar: CSV (id, then one column per dimension) or JSONL {id, embedding}."""
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    if path.suffix.lower() == ".csv":
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != "id":
                raise SchemaError(f"{path}: first column must be 'id'")
            for row in reader:
                if row:
                    out[row[0]] = np.array([float(x) for x in row[1:]])
    else:
        with path.open() as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    out[str(rec["id"])] = np.array(rec["embedding"], dtype=float)
    dims = {v.size for v in out.values()}
    if len(dims) > 1:
        raise SchemaError(f"{path}: embeddings have differing widths {sorted(dims)}")
    return out


def read_relaxed(path: str | Path) -> tuple[dict[tuple[str, str], Structure], dict[tuple[str, str], float]]:
    """Relaxed structures (JSONL with id, column and structure fields) or precomputed RMSD (CSV id,column,rmsd)."""
    path = Path(path)
    structs: dict[tuple[str, str], Structure] = {}
    values: dict[tuple[str, str], float] = {}
    if path.suffix.lower() == ".csv":
        with path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                values[(row["id"], row.get("column") or "default")] = float(row["rmsd"])
    else:
        with path.open() as fh:
            for n, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                try:
                    key = (str(rec["id"]), str(rec.get("column") or "default"))
                except KeyError:
                    raise SchemaError(f"{path}:{n}: relaxed record needs 'id'") from None
                structs[key] = Structure.from_dict(rec)
    return structs, values
