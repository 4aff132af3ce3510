"""End-to-end benchmark run: parse, validity gate, stability, funnel, metrics, report."""

from __future__ import annotations

import math
import multiprocessing as mp
from collections import Counter
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import __version__, elements
from .config import SCHEMA_VERSION, RunConfig
from .errors import BenchError, ConfigError, SchemaError
from .fingerprint import crystal_graph, wl_hash
from .funnel import ReferenceIndex, sun_rates
from .hhi import combined_hhi, compound_hhi, load_hhi_table, risk_category
from .hull import Reference, StabilityResult, ensemble_stability, mean_std, read_reference_entries
from .io import Candidate, read_candidates, read_energies, read_relaxed, read_vectors
from .rmsd import RelaxPair, paired_rmsd, rmsd_ensemble
from .stats import (
    JsInputs,
    diversity_suite,
    feature_vector,
    frechet_distance,
    js_components,
    mmd,
    standardize,
)
from .structure import mass_density
from .symmetry import get_provider
from .validity import ValidityReport, load_oxidation_table, validity_rate, validity_report

# Worker state. Populated before the pool forks so workers inherit it read-only.
_CTX: dict[str, Any] = {}


def parallel_map(fn: Callable, n: int, threads: int) -> list:
    """Order-preserving map of ``fn`` over range(n), optionally across forked processes."""
    if threads <= 1 or n < 2:
        return [fn(i) for i in range(n)]
    ctx = mp.get_context("fork")
    chunk = max(1, n // (threads * 4))
    with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as ex:
        return list(ex.map(fn, range(n), chunksize=chunk))


@dataclass
class StructureRecord:
    """Everything computed for one candidate before any cross-structure aggregation."""

    id: str
    validity: ValidityReport
    error: str | None = None
    fingerprint: str | None = None
    space_group: int | str | None = None
    site_categories: list[tuple[str, int]] | None = None
    features: list[float] | None = None
    density: float | None = None


def _evaluate(i: int) -> StructureRecord:
    cand: Candidate = _CTX["candidates"][i]
    cfg: RunConfig = _CTX["config"]
    rep = validity_report(cand.structure, _CTX["oxidation"], cfg.validity, _CTX["provider"])
    rec = StructureRecord(cand.id, rep, cand.error)
    s = cand.structure
    if rep.overall and s is not None:
        try:
            g = crystal_graph(s)
            rec.fingerprint = f"{s.composition.reduced_formula}_{rep.space_group or 0}_{wl_hash(g)}"
            rec.site_categories = [(g.labels[k], g.degree(k)) for k in range(g.num_nodes)]
            rec.features = [float(x) for x in feature_vector(s)]
            rec.density = mass_density(s)
        except BenchError as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
    rec.space_group = rep.space_group
    return rec


def _stability(i: int) -> StabilityResult | None:
    job = _CTX["stability_jobs"][i]
    if job is None:
        return None
    comp, energies = job
    return ensemble_stability(comp, energies, _CTX["reference"], _CTX["config"].stability)


def _reference_features(i: int) -> list[float]:
    return [float(x) for x in feature_vector(_CTX["ref_structures"][i])]


def _subsample(n: int, k: int, seed: int) -> np.ndarray:
    if n <= k:
        return np.arange(n)
    return np.sort(np.random.default_rng(seed).choice(n, size=k, replace=False))


def relaxed_candidates(path, column: str | None = None) -> list[Candidate]:
    """Candidates taken from a relaxed-structure file, one relaxation column (first sorted by default)."""
    structs, _ = read_relaxed(path)
    if not structs:
        raise SchemaError(f"{path}: no relaxed structures to evaluate")
    cols = sorted({c for _, c in structs})
    col = column if column is not None else cols[0]
    if col not in cols:
        raise ConfigError(f"relaxed column {col!r} not among {cols}")
    return [Candidate(sid, s.with_meta(id=sid)) for (sid, c), s in structs.items() if c == col]


def _clean(x):
    """Map non-finite floats to None so the JSON stays standard."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def run(config: RunConfig) -> dict:
    """Evaluate a candidate set and return the report as a JSON-ready dict."""
    config.validate()
    threads = config.threads
    if config.evaluate == "post":
        candidates = relaxed_candidates(config.relaxed, config.relaxed_column)
    else:
        candidates = read_candidates(config.candidates) if config.candidates else []
    oxidation = load_oxidation_table(config.oxidation_table)
    hhi_table = load_hhi_table(config.hhi_table)
    provider = get_provider(config.symmetry_provider)

    reference = Reference(read_reference_entries(config.reference)) if config.reference else None
    if config.reference_fingerprints:
        ref_index = ReferenceIndex.from_file(config.reference_fingerprints)
    elif reference is not None:
        ref_index = ReferenceIndex.from_reference(reference, provider=provider)
    else:
        ref_index = ReferenceIndex()

    _CTX.clear()
    _CTX.update(candidates=candidates, config=config, oxidation=oxidation, provider=provider, reference=reference)

    # 1. validity and per-structure descriptors
    records: list[StructureRecord] = parallel_map(_evaluate, len(candidates), threads)
    valid_idx = [i for i, r in enumerate(records) if r.validity.overall]
    valid_structs = [candidates[i].structure for i in valid_idx]

    # 2. stability on the valid subset
    energy_cols: list[str] = []
    energy_rows: dict[str, dict[str, float]] = {}
    if config.energies:
        energy_cols, energy_rows = read_energies(config.energies)
    jobs = []
    for i, rec in enumerate(records):
        if rec.validity.overall and reference is not None:
            jobs.append((candidates[i].structure.composition, energy_rows.get(rec.id, {})))
        else:
            jobs.append(None)
    _CTX["stability_jobs"] = jobs
    stability: list[StabilityResult | None] = parallel_map(_stability, len(jobs), threads)
    for i in valid_idx:
        if stability[i] is None:
            stability[i] = StabilityResult(skipped={"*": "no reference"})
        elif not jobs[i][1]:
            stability[i].skipped.setdefault("*", "no energy row")

    # 3. funnel
    novelty_method = None if config.novelty_method == "auto" else config.novelty_method
    funnel = sun_rates(
        [c.structure for c in candidates],
        stability,
        ref_index,
        config.stability,
        valid=[r.validity.overall for r in records],
        uniqueness_method=config.uniqueness_method,
        novelty_method=novelty_method,
        tol=config.match,
        fingerprints=[r.fingerprint for r in records],
    )

    # 4. energies summary
    ef = [stability[i].e_form_mean for i in valid_idx if stability[i].e_form_mean is not None]
    eh = [stability[i].e_hull_mean for i in valid_idx if stability[i].e_hull_mean is not None]
    ef_m, ef_s = mean_std(ef)
    eh_m, eh_s = mean_std(eh)
    energy_block: dict[str, Any] = {
        "columns": energy_cols,
        "n_evaluated": len(eh),
        "n_unevaluable": funnel.n_unevaluable,
        "e_form_mean": ef_m,
        "e_form_std": ef_s,
        "e_hull_mean": eh_m,
        "e_hull_std": eh_s,
        "rmsd": None,
    }

    # 5. RMSD against relaxed structures
    if config.metrics.get("rmsd") and config.relaxed:
        energy_block["rmsd"] = _rmsd_block(config.relaxed, candidates, valid_idx)

    # 6. diversity / distribution / HHI on the valid subset
    diversity = None
    if config.metrics.get("diversity") and valid_idx:
        diversity = diversity_suite(
            valid_structs,
            space_groups=[records[i].space_group for i in valid_idx],
            site_cats=[records[i].site_categories for i in valid_idx],
        ).to_dict()

    distribution = None
    if config.metrics.get("distribution") and valid_idx and reference is not None:
        distribution = _distribution_block(config, records, valid_idx, reference, provider)

    hhi_block = None
    hhi_rows: dict[int, dict] = {}
    if config.metrics.get("hhi") and valid_idx:
        for i in valid_idx:
            comp = candidates[i].structure.composition
            prod = compound_hhi(comp, hhi_table, "production")
            res = compound_hhi(comp, hhi_table, "reserve")
            comb = combined_hhi(comp, hhi_table, config.hhi)
            hhi_rows[i] = {"production": prod, "reserve": res, "combined": comb, "category": risk_category(comb).value}
        cats = Counter(r["category"] for r in hhi_rows.values())
        hhi_block = {
            "production_mean": math.fsum(r["production"] for r in hhi_rows.values()) / len(hhi_rows),
            "reserve_mean": math.fsum(r["reserve"] for r in hhi_rows.values()) / len(hhi_rows),
            "combined_mean": math.fsum(r["combined"] for r in hhi_rows.values()) / len(hhi_rows),
            "categories": {k: cats.get(k, 0) for k in ("Low", "Moderate", "High")},
            "weights": {"production": config.hhi.w_prod, "reserve": config.hhi.w_res},
        }

    # 7. report
    reports = [r.validity for r in records]
    check_counts = {name: sum(bool(getattr(r, name)) for r in reports) for name in ValidityReport.CHECKS}
    stages = Counter(r.assignment.stage.value for r in reports if r.assignment and r.assignment.stage)
    model = {"name": config.model.get("name", "model"), "n_submitted": len(candidates)}
    model.update({k: v for k, v in sorted(config.model.items()) if k != "name"})

    audit = []
    for i, rec in enumerate(records):
        st = stability[i]
        audit.append({
            "id": rec.id,
            "error": rec.error,
            "validity": rec.validity.to_dict(),
            "fingerprint": rec.fingerprint,
            "stability": st.to_dict() if st is not None else None,
            "funnel": funnel.labels[i],
            "hhi": hhi_rows.get(i),
        })

    report = {
        "schema_version": SCHEMA_VERSION,
        "engine_version": __version__,
        "model": model,
        "validity": {
            "n_submitted": len(candidates),
            "n_valid": len(valid_idx),
            "rate": validity_rate(reports),
            "check_pass_counts": check_counts,
            "charge_stage_counts": {k: stages.get(k, 0) for k in ("Metallic", "Standard", "DataDriven", "Historical")},
        },
        "funnel": funnel.to_dict(),
        "energy": energy_block,
        "diversity": diversity,
        "distribution": distribution,
        "hhi": hhi_block,
        "structures": audit,
        "config": config.to_dict(),
        "data_versions": {
            "elements": elements.table_version(),
            "oxidation_states": oxidation.version,
            "hhi": hhi_table.version,
            "symmetry_provider": config.symmetry_provider,
            "entropy_log_base": "e",
            "js_log_base": 2,
        },
    }
    return _sanitize(report)


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.floating):
        return _clean(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return _clean(obj)


def _rmsd_block(path, candidates: Sequence[Candidate], valid_idx: Sequence[int]) -> dict:
    structs, values = read_relaxed(path)
    by_id = {candidates[i].id: candidates[i].structure for i in valid_idx}
    per: dict[str, dict[str, float]] = {}
    errors: dict[str, str] = {}
    for (sid, col), after in sorted(structs.items()):
        before = by_id.get(sid)
        if before is None:
            continue
        try:
            per.setdefault(sid, {})[col] = paired_rmsd(RelaxPair(before, after, col))
        except BenchError as exc:
            errors[f"{sid}/{col}"] = f"{type(exc).__name__}: {exc}"
    for (sid, col), v in sorted(values.items()):
        if sid in by_id:
            per.setdefault(sid, {})[col] = v
    block = rmsd_ensemble(per).to_dict()
    block["errors"] = errors
    return block


def _distribution_block(config, records, valid_idx, reference: Reference, provider) -> dict:
    ref_structs = [e.structure for e in reference.entries if e.structure is not None]
    gen = JsInputs(
        tuple(records[i].space_group for i in valid_idx),
        tuple(tuple(sorted(set(_CTX["candidates"][i].structure.species))) for i in valid_idx),
        tuple(len(_CTX["candidates"][i].structure) for i in valid_idx),
        tuple(records[i].density for i in valid_idx),
    )
    if ref_structs:
        ref = JsInputs.from_structures(ref_structs, provider=provider)
    else:
        ref = JsInputs(None, tuple(tuple(sorted(e.composition)) for e in reference.entries), None, None)
    comps = js_components(gen, ref, config.density_bins)
    block: dict[str, Any] = {
        "js": math.fsum(comps.values()) / len(comps),
        "js_components": comps,
        "mmd": None,
        "fid": None,
    }
    if len(ref_structs) >= 2 and len(valid_idx) >= 2:
        gi = _subsample(len(valid_idx), config.mmd_max_samples, config.seed)
        ri = _subsample(len(ref_structs), config.mmd_max_samples, config.seed + 1)
        _CTX["ref_structures"] = [ref_structs[k] for k in ri]
        X = np.array([records[valid_idx[k]].features for k in gi])
        Y = np.array(parallel_map(_reference_features, len(ri), config.threads))
        block["mmd"] = mmd(*standardize(X, Y))
    if config.embeddings and config.reference_embeddings:
        gen_emb = read_vectors(config.embeddings)
        ref_emb = read_vectors(config.reference_embeddings)
        X = [gen_emb[records[i].id] for i in valid_idx if records[i].id in gen_emb]
        Y = [ref_emb[k] for k in sorted(ref_emb)]
        if len(X) >= 2 and len(Y) >= 2:
            block["fid"] = frechet_distance(np.array(X), np.array(Y))
    return block
