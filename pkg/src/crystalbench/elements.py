"""Static per-element data shipped with the package (see data/elements.json)."""

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import UnknownElement


@dataclass(frozen=True)
class ElementData:
    symbol: str
    Z: int
    mass: float
    chi: float | None
    covalent_radius: float
    kind: str  # "metal" | "metalloid" | "nonmetal"

    @property
    def is_metal(self) -> bool:
        return self.kind == "metal"

    @property
    def is_metalloid(self) -> bool:
        return self.kind == "metalloid"


@lru_cache(maxsize=None)
def _load():
    raw = json.loads(resources.files("crystalbench.data").joinpath("elements.json").read_text())
    table = {
        sym: ElementData(sym, d["Z"], d["mass"], d["chi"], d["covalent_radius"], d["kind"])
        for sym, d in raw["elements"].items()
    }
    return raw["version"], table


def table_version() -> str:
    return _load()[0]


def element(symbol: str) -> ElementData:
    try:
        return _load()[1][symbol]
    except KeyError:
        raise UnknownElement(f"unknown element symbol {symbol!r}") from None


def is_element(symbol: str) -> bool:
    return symbol in _load()[1]


def all_symbols() -> list[str]:
    return list(_load()[1])


def electronegativity_key(symbol: str) -> tuple[float, str]:
    """Sort key used for formulas: Pauling electronegativity, then symbol.

    Elements without an electronegativity (He, Ne, Ar) sort last.
    """
    chi = element(symbol).chi
    return (float("inf") if chi is None else chi, symbol)
