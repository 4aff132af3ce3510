"""Regenerate the bundled element tables under src/crystalbench/data/.

Usage:
    python tools/build_element_data.py path/to/pymatgen-*.whl

Masses, Pauling electronegativities and oxidation-state lists come from the
pymatgen periodic table; common-state probabilities are ICSD occurrence
frequencies from pymatgen's icsd_bv.yaml; supply-risk HHI values from
pymatgen's hhi_data.csv. Covalent radii are Cordero et al. (2008).
The output files are committed; this script only documents their origin.
"""

import csv
import gzip
import io
import json
import sys
import zipfile
from pathlib import Path

import yaml

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "crystalbench" / "data"
TABLE_VERSION = "2025.10-icsd-occ"

# Cordero et al., Dalton Trans. 2008 (sp3 C, low-spin Mn/Fe/Co).
COVALENT_RADII = {
    "H": 0.31, "He": 0.28, "Li": 1.28, "Be": 0.96, "B": 0.84, "C": 0.76, "N": 0.71,
    "O": 0.66, "F": 0.57, "Ne": 0.58, "Na": 1.66, "Mg": 1.41, "Al": 1.21, "Si": 1.11,
    "P": 1.07, "S": 1.05, "Cl": 1.02, "Ar": 1.06, "K": 2.03, "Ca": 1.76, "Sc": 1.70,
    "Ti": 1.60, "V": 1.53, "Cr": 1.39, "Mn": 1.39, "Fe": 1.32, "Co": 1.26, "Ni": 1.24,
    "Cu": 1.32, "Zn": 1.22, "Ga": 1.22, "Ge": 1.20, "As": 1.19, "Se": 1.20, "Br": 1.20,
    "Kr": 1.16, "Rb": 2.20, "Sr": 1.95, "Y": 1.90, "Zr": 1.75, "Nb": 1.64, "Mo": 1.54,
    "Tc": 1.47, "Ru": 1.46, "Rh": 1.42, "Pd": 1.39, "Ag": 1.45, "Cd": 1.44, "In": 1.42,
    "Sn": 1.39, "Sb": 1.39, "Te": 1.38, "I": 1.39, "Xe": 1.40, "Cs": 2.44, "Ba": 2.15,
    "La": 2.07, "Ce": 2.04, "Pr": 2.03, "Nd": 2.01, "Pm": 1.99, "Sm": 1.98, "Eu": 1.98,
    "Gd": 1.96, "Tb": 1.94, "Dy": 1.92, "Ho": 1.92, "Er": 1.89, "Tm": 1.90, "Yb": 1.87,
    "Lu": 1.87, "Hf": 1.75, "Ta": 1.70, "W": 1.62, "Re": 1.51, "Os": 1.44, "Ir": 1.41,
    "Pt": 1.36, "Au": 1.36, "Hg": 1.32, "Tl": 1.45, "Pb": 1.46, "Bi": 1.48, "Po": 1.40,
    "At": 1.50, "Rn": 1.50, "Fr": 2.60, "Ra": 2.21, "Ac": 2.15, "Th": 2.06, "Pa": 2.00,
    "U": 1.96, "Np": 1.90, "Pu": 1.87, "Am": 1.80, "Cm": 1.69,
}
DEFAULT_COVALENT_RADIUS = 1.70

NONMETALS = {
    "H", "He", "C", "N", "O", "F", "Ne", "P", "S", "Cl", "Ar", "Se", "Br", "Kr",
    "I", "Xe", "Rn", "At", "Ts", "Og",
}
METALLOIDS = {"B", "Si", "Ge", "As", "Sb", "Te", "Po"}

# ICSD states below this share of an element's occurrences are treated as noise.
MIN_COMMON_SHARE = 0.01


def _species_state(label):
    # "Fe2+" -> ("Fe", 2), "O2-" -> ("O", -2), "Cl-" -> ("Cl", -1), "Ag0+" -> ("Ag", 0)
    i = 0
    while i < len(label) and label[i].isalpha():
        i += 1
    el, rest = label[:i], label[i:]
    sign = -1 if rest.endswith("-") else 1
    digits = rest[:-1]
    return el, sign * (int(digits) if digits else 1)


def main(wheel):
    zf = zipfile.ZipFile(wheel)
    table = json.load(gzip.open(io.BytesIO(zf.read("pymatgen/core/periodic_table.json.gz"))))
    occurrence = yaml.safe_load(zf.read("pymatgen/analysis/icsd_bv.yaml"))["occurrence"]
    hhi_rows = zf.read("pymatgen/analysis/hhi_data.csv").decode().splitlines()

    counts = {}
    for label, n in occurrence.items():
        el, q = _species_state(label)
        if q != 0:
            counts.setdefault(el, {})[q] = counts.get(el, {}).get(q, 0) + n

    elements = {}
    oxidation = {}
    for sym, row in sorted(table.items(), key=lambda kv: kv[1].get("Atomic no", 0)):
        if sym in ("_unit", "D", "T"):
            continue
        kind = "nonmetal" if sym in NONMETALS else "metalloid" if sym in METALLOIDS else "metal"
        elements[sym] = {
            "Z": row["Atomic no"],
            "mass": float(str(row["Atomic mass"]).split()[0]),
            "chi": row.get("X"),
            "covalent_radius": COVALENT_RADII.get(sym, DEFAULT_COVALENT_RADIUS),
            "kind": kind,
        }
        historical = set(row.get("Oxidation states") or [])
        common = []
        if sym in counts:
            total = sum(counts[sym].values())
            common = [
                [q, n / total]
                for q, n in sorted(counts[sym].items())
                if n / total >= MIN_COMMON_SHARE
            ]
        if not common:
            fallback = row.get("ICSD oxidation states") or row.get("Common oxidation states") or []
            common = [[q, 1.0 / len(fallback)] for q in sorted(fallback)]
        if not common and not historical:
            continue
        historical |= {q for q, _ in common}
        oxidation[sym] = {
            "common": [[q, round(p, 6)] for q, p in common],
            "historical": sorted(historical),
            "chi": row.get("X"),
        }

    (DATA_DIR / "elements.json").write_text(
        json.dumps({"version": TABLE_VERSION, "elements": elements}, indent=1) + "\n"
    )
    (DATA_DIR / "oxidation_states.json").write_text(
        json.dumps({"version": TABLE_VERSION, "elements": oxidation}, indent=1) + "\n"
    )

    seen = {}
    for line in hhi_rows:
        if not line.strip() or line.startswith("#"):
            continue
        el, prod, res = line.split(",")
        seen.setdefault(el, (int(prod), int(res)))
    with open(DATA_DIR / "hhi.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["element", "hhi_production", "hhi_reserve"])
        for el, (prod, res) in seen.items():
            w.writerow([el, prod, res])


if __name__ == "__main__":
    main(sys.argv[1])
