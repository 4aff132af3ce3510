"""Herfindahl-Hirschman supply-risk scores for compositions."""

from __future__ import annotations

import csv
import enum
import io
import math
from collections.abc import Mapping
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import SchemaError
from .structure import Composition

HHI_MAX = 10000.0
SCALE = 1000.0


@dataclass(frozen=True)
class HhiTable:
    production: Mapping[str, float]
    reserve: Mapping[str, float]
    version: str = "custom"


@dataclass(frozen=True)
class HhiConfig:
    w_prod: float = 0.25
    w_res: float = 0.75
    scaled: bool = True

    def __post_init__(self):
        if self.w_prod < 0 or self.w_res < 0 or abs(self.w_prod + self.w_res - 1.0) > 1e-12:
            raise ValueError("HHI weights must be non-negative and sum to 1")


class RiskCategory(str, enum.Enum):
    LOW = "Low"
    MODERATE = "Moderate"
    HIGH = "High"


def _parse_table(text: str, version: str) -> HhiTable:
    prod, res = {}, {}
    try:
        for row in csv.DictReader(io.StringIO(text)):
            el = row["element"].strip()
            prod[el] = float(row["hhi_production"])
            res[el] = float(row["hhi_reserve"])
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"bad HHI table: {exc}") from None
    for v in list(prod.values()) + list(res.values()):
        if not 0.0 <= v <= HHI_MAX:
            raise SchemaError(f"HHI value {v} outside [0, {HHI_MAX:g}]")
    return HhiTable(prod, res, version)


@lru_cache(maxsize=None)
def _default_table() -> HhiTable:
    text = resources.files("crystalbench.data").joinpath("hhi.csv").read_text()
    return _parse_table(text, "bundled")


def load_hhi_table(path: str | Path | None = None) -> HhiTable:
    if path is None:
        return _default_table()
    return _parse_table(Path(path).read_text(), Path(path).name)


def compound_hhi(
    c: Composition, table: HhiTable | None = None, which: str = "production", scaled: bool = True
) -> float:
    """Atomic-fraction-weighted HHI; elements missing from the table count as the maximum."""
    table = table or _default_table()
    if which not in ("production", "reserve"):
        raise ValueError("which must be 'production' or 'reserve'")
    values = table.production if which == "production" else table.reserve
    raw = math.fsum(x * values.get(el, HHI_MAX) for el, x in c.fractions().items())
    return raw / SCALE if scaled else raw


def combined_hhi(c: Composition, table: HhiTable | None = None, cfg: HhiConfig = HhiConfig()) -> float:
    prod = compound_hhi(c, table, "production", cfg.scaled)
    res = compound_hhi(c, table, "reserve", cfg.scaled)
    return cfg.w_prod * prod + cfg.w_res * res


def risk_category(score_scaled: float) -> RiskCategory:
    if score_scaled <= 2.0:
        return RiskCategory.LOW
    if score_scaled <= 5.0:
        return RiskCategory.MODERATE
    return RiskCategory.HIGH
