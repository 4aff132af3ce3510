"""Command-line entry point.

Every subcommand runs the same pipeline; the narrower ones switch off the
metrics they do not need and print a slice of the report. Exit status is 0 on
success, 1 on a fatal config or schema error, 2 when no candidate survives the
validity gate.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import BenchError
from .pipeline import run
from .report import emit_markdown, load_json, to_json

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_EMPTY = 2

# report keys printed by each narrow subcommand; run prints everything
_SLICES = {
    "validate": ("schema_version", "model", "validity"),
    "stability": ("schema_version", "model", "validity", "energy"),
    "funnel": ("schema_version", "model", "validity", "funnel", "energy"),
    "metrics": ("schema_version", "model", "validity", "energy", "diversity", "distribution", "hhi"),
}

_NO_METRICS = {"diversity": False, "distribution": False, "hhi": False, "rmsd": False}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config; flags below override its keys")
    p.add_argument("--candidates", nargs="+", help="JSONL files, CIF files or CIF directories")
    p.add_argument("--reference", help="reference set (JSONL or CSV)")
    p.add_argument("--energies", help="candidate energy CSV (id plus one column per model)")
    p.add_argument("--embeddings", help="candidate embeddings (CSV or JSONL)")
    p.add_argument("--reference-embeddings", dest="reference_embeddings", help="reference embeddings")
    p.add_argument("--relaxed", help="relaxed structures (JSONL) or precomputed RMSD (CSV)")
    p.add_argument("--reference-fingerprints", dest="reference_fingerprints", help="one fingerprint per line")
    p.add_argument("--evaluate", choices=("pre", "post"), help="evaluate submitted or relaxed structures")
    p.add_argument("--threads", type=int, help="worker processes")
    p.add_argument("--seed", type=int, help="seed for subsampling")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--markdown", help="also write a one-row markdown table here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crystalbench", description="Benchmark generated crystal structures.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "validate": "validity checks only",
        "stability": "validity plus formation and hull energies",
        "funnel": "validity, stability, uniqueness and novelty rates",
        "metrics": "diversity, distribution, HHI and RMSD metrics",
        "run": "full report",
    }
    for name, text in helps.items():
        _add_run_flags(sub.add_parser(name, help=text))

    rp = sub.add_parser("report", help="markdown table from one or more JSON reports")
    rp.add_argument("reports", nargs="+")
    rp.add_argument("--out", help="write markdown here instead of stdout")

    sp = sub.add_parser("sample-baseline", help="two-step resampling of a structure pool")
    sp.add_argument("pool", help="JSONL pool, one structure per line")
    sp.add_argument("--first", type=int, default=10000, help="draw this many without replacement")
    sp.add_argument("--draws", type=int, default=2500, help="then this many with replacement")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="output JSONL (stdout if omitted)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    for key in ("reference", "energies", "embeddings", "reference_embeddings", "relaxed", "reference_fingerprints"):
        v = getattr(args, key)
        if v is not None:
            overrides[key] = str(Path(v).resolve())
    if args.candidates:
        overrides["candidates"] = [str(Path(p).resolve()) for p in args.candidates]
    for key in ("threads", "seed", "out", "evaluate"):
        overrides[key] = getattr(args, key)
    cfg = cfg.override(**overrides)
    if args.command in ("validate", "stability", "funnel"):
        cfg = cfg.override(metrics=dict(_NO_METRICS))
    if args.command == "validate":
        cfg = cfg.override(reference=None, energies=None, reference_fingerprints=None)
    return cfg


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def sample_baseline(lines: list[str], first: int, draws: int, seed: int) -> list[str]:
    """Draw ``first`` lines without replacement, then ``draws`` from those with replacement."""
    rng = np.random.default_rng(seed)
    k = min(first, len(lines))
    pool = rng.choice(len(lines), size=k, replace=False)
    picks = rng.choice(pool, size=draws, replace=True) if k else []
    return [lines[int(i)] for i in picks]


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            _emit(emit_markdown([load_json(p) for p in args.reports]), args.out)
            return EXIT_OK
        if args.command == "sample-baseline":
            lines = [ln for ln in Path(args.pool).read_text().splitlines() if ln.strip()]
            out = sample_baseline(lines, args.first, args.draws, args.seed)
            _emit("".join(ln + "\n" for ln in out), args.out)
            return EXIT_OK

        cfg = config_from_args(args)
        report = run(cfg)
        if args.command in _SLICES:
            keys = _SLICES[args.command]
            sliced = {k: report[k] for k in keys}
            sliced["structures"] = [_audit_slice(r, args.command) for r in report["structures"]]
            payload = sliced
        else:
            payload = report
        _emit(to_json(payload), cfg.out)
        if args.markdown:
            Path(args.markdown).write_text(emit_markdown(report))
    except (BenchError, json.JSONDecodeError, OSError) as exc:
        print(f"crystalbench: error: {exc}", file=sys.stderr)
        return EXIT_FATAL

    if report["validity"]["n_valid"] == 0:
        print("crystalbench: warning: no candidate passed the validity checks", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def _audit_slice(row: dict, command: str) -> dict:
    keep = {"id", "error", "validity"}
    if command in ("stability", "funnel", "metrics"):
        keep |= {"stability"}
    if command == "funnel":
        keep |= {"fingerprint", "funnel"}
    if command == "metrics":
        keep |= {"hhi"}
    return {k: v for k, v in row.items() if k in keep}


if __name__ == "__main__":
    sys.exit(main())
