"""Run configuration: a single JSON document whose keys mirror the CLI flags."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .fingerprint import MatchTolerances
from .hhi import HhiConfig
from .hull import StabilityThresholds
from .validity import ValidityConfig

SCHEMA_VERSION = 1

DEFAULT_METRICS = {"diversity": True, "distribution": True, "hhi": True, "rmsd": True}


@dataclass
class RunConfig:
    candidates: list[str] = field(default_factory=list)
    reference: str | None = None
    energies: str | None = None
    embeddings: str | None = None
    reference_embeddings: str | None = None
    relaxed: str | None = None
    reference_fingerprints: str | None = None
    oxidation_table: str | None = None
    hhi_table: str | None = None
    validity: ValidityConfig = field(default_factory=ValidityConfig)
    stability: StabilityThresholds = field(default_factory=StabilityThresholds)
    match: MatchTolerances = field(default_factory=MatchTolerances)
    hhi: HhiConfig = field(default_factory=HhiConfig)
    metrics: dict[str, bool] = field(default_factory=lambda: dict(DEFAULT_METRICS))
    uniqueness_method: str = "fingerprint"
    novelty_method: str = "auto"  # "auto" | "fingerprint" | "matcher"
    symmetry_provider: str = "fallback"
    evaluate: str = "pre"  # "pre" | "post": post re-runs on the relaxed structures
    relaxed_column: str | None = None
    density_bins: int = 20
    mmd_max_samples: int = 2000
    seed: int = 0
    threads: int = 1
    out: str | None = None
    model: dict[str, Any] = field(default_factory=dict)

    _NESTED = {
        "validity": ValidityConfig,
        "stability": StabilityThresholds,
        "match": MatchTolerances,
        "hhi": HhiConfig,
    }

    # execution settings that cannot change results; left out of the report echo
    _RUNTIME_KEYS = ("threads", "out")

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = {}
        for f in dataclasses.fields(self):
            if f.name in self._RUNTIME_KEYS and not include_runtime:
                continue
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                v = {k: (list(x) if isinstance(x, tuple) else x) for k, x in dataclasses.asdict(v).items()}
            elif isinstance(v, dict):
                v = dict(sorted(v.items()))
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> RunConfig:
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kw: dict[str, Any] = {}
        for key, value in raw.items():
            if key in cls._NESTED:
                sub = cls._NESTED[key]
                if not isinstance(value, dict):
                    raise ConfigError(f"{key} must be an object")
                sub_known = {f.name for f in dataclasses.fields(sub)}
                bad = sorted(set(value) - sub_known)
                if bad:
                    raise ConfigError(f"unknown keys in {key}: {', '.join(bad)}")
                value = {k: tuple(v) if isinstance(v, list) else v for k, v in value.items()}
                try:
                    kw[key] = sub(**value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{key}: {exc}") from None
            elif key == "metrics":
                if not isinstance(value, dict) or set(value) - set(DEFAULT_METRICS):
                    raise ConfigError(f"metrics keys must be among {sorted(DEFAULT_METRICS)}")
                kw[key] = {**DEFAULT_METRICS, **{k: bool(v) for k, v in value.items()}}
            elif key == "candidates":
                kw[key] = [value] if isinstance(value, str) else list(value)
            else:
                kw[key] = value
        cfg = cls(**kw)
        if base_dir is not None:
            cfg = cfg.resolve_paths(base_dir)
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
        return cls.from_dict(raw, path.parent)

    _PATH_KEYS = (
        "reference", "energies", "embeddings", "reference_embeddings", "relaxed",
        "reference_fingerprints", "oxidation_table", "hhi_table",
    )

    def resolve_paths(self, base_dir: Path) -> RunConfig:
        def fix(p):
            if p is None:
                return None
            q = Path(p)
            return str(q if q.is_absolute() else (base_dir / q))

        changes = {k: fix(getattr(self, k)) for k in self._PATH_KEYS}
        changes["candidates"] = [fix(p) for p in self.candidates]
        return dataclasses.replace(self, **changes)

    def override(self, **flags) -> RunConfig:
        changes = {k: v for k, v in flags.items() if v is not None}
        if "candidates" in changes and isinstance(changes["candidates"], str):
            changes["candidates"] = [changes["candidates"]]
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.uniqueness_method not in ("fingerprint", "matcher"):
            raise ConfigError(f"bad uniqueness_method {self.uniqueness_method!r}")
        if self.novelty_method not in ("auto", "fingerprint", "matcher"):
            raise ConfigError(f"bad novelty_method {self.novelty_method!r}")
        if self.symmetry_provider not in ("fallback", "spglib"):
            raise ConfigError(f"bad symmetry_provider {self.symmetry_provider!r}")
        if self.evaluate not in ("pre", "post"):
            raise ConfigError(f"bad evaluate mode {self.evaluate!r}")
        if self.evaluate == "post" and not self.relaxed:
            raise ConfigError("evaluate 'post' needs a relaxed structure file")
        if self.density_bins < 1 or self.mmd_max_samples < 2:
            raise ConfigError("density_bins must be >= 1 and mmd_max_samples >= 2")
        for p in self.candidates:
            if not Path(p).exists():
                raise ConfigError(f"candidate path {p} does not exist")
        for k in self._PATH_KEYS:
            p = getattr(self, k)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{k} path {p} does not exist")
