import json
import math

import pytest

from crystalbench.config import RunConfig
from crystalbench.hull import mean_std
from crystalbench.pipeline import run
from crystalbench.report import emit_markdown, to_json
from crystalbench.synthetic import bundled_mini_config


@pytest.fixture(scope="module")
def mini_config():
    return RunConfig.load(bundled_mini_config())


@pytest.fixture(scope="module")
def mini_report(mini_config):
    return run(mini_config)


def test_mini_corpus_shape(mini_report):
    assert mini_report["model"]["n_submitted"] == 50
    assert mini_report["validity"]["n_submitted"] == 50
    assert 0 < mini_report["validity"]["n_valid"] < 50
    assert len(mini_report["structures"]) == 50
    keys = list(mini_report)
    assert keys == [
        "schema_version", "engine_version", "model", "validity", "funnel", "energy",
        "diversity", "distribution", "hhi", "structures", "config", "data_versions",
    ]


def test_rates_use_submitted_denominator(mini_report):
    f = mini_report["funnel"]
    for name in ("valid", "unique", "novel", "stable", "sun", "metastable", "msun"):
        assert f["rates"][name] == pytest.approx(100.0 * f[f"n_{name}"] / f["n_submitted"])
        assert f["rates"][name] <= mini_report["validity"]["rate"] + 1e-12


def test_audit_trail_closure(mini_report):
    rows = mini_report["structures"]
    labels = [r["funnel"] for r in rows]
    f = mini_report["funnel"]
    assert f["n_valid"] == sum(r["validity"]["overall"] for r in rows) == sum(x != "invalid" for x in labels)
    assert f["n_stable"] == sum(x in ("SUN", "stable-known", "stable-duplicate") for x in labels)
    assert f["n_unique_stable"] == sum(x in ("SUN", "stable-known") for x in labels)
    assert f["n_sun"] == labels.count("SUN")
    assert f["n_metastable"] == sum(x in ("MSUN", "metastable-known", "metastable-duplicate") for x in labels)
    assert f["n_msun"] == labels.count("MSUN")
    assert f["n_unevaluable"] == labels.count("unevaluable")

    eh = [r["stability"]["e_hull_mean"] for r in rows if r["validity"]["overall"] and r["stability"]["e_hull_mean"] is not None]
    m, s = mean_std(eh)
    assert abs(mini_report["energy"]["e_hull_mean"] - m) <= 1e-9
    assert abs(mini_report["energy"]["e_hull_std"] - s) <= 1e-9

    hhi = [r["hhi"] for r in rows if r["hhi"] is not None]
    assert len(hhi) == f["n_valid"]
    assert abs(mini_report["hhi"]["combined_mean"] - math.fsum(h["combined"] for h in hhi) / len(hhi)) <= 1e-9

    # stability classes recomputed from per-column hull energies
    for r in rows:
        st = r["stability"]
        if st and st["e_hull"]:
            mm, _ = mean_std(list(st["e_hull"].values()))
            assert abs(mm - st["e_hull_mean"]) <= 1e-9


def test_mini_corpus_exercises_every_stage(mini_report):
    labels = {r["funnel"] for r in mini_report["structures"]}
    assert {"invalid", "SUN", "MSUN", "unstable", "unevaluable"} <= labels
    assert mini_report["distribution"]["fid"] is not None
    assert mini_report["energy"]["rmsd"]["mean"] is not None
    assert all(r["error"] for r in mini_report["structures"] if not r["validity"]["readable"])


def test_deterministic_across_runs_and_workers(mini_config, mini_report):
    again = run(mini_config)
    parallel = run(mini_config.override(threads=3))
    assert to_json(again) == to_json(mini_report) == to_json(parallel)
    assert emit_markdown(parallel) == emit_markdown(mini_report)


def test_empty_candidate_set(tmp_path):
    (tmp_path / "c.jsonl").write_text("")
    rep = run(RunConfig(candidates=[str(tmp_path / "c.jsonl")]))
    assert rep["model"]["n_submitted"] == 0
    assert all(v == 0.0 for v in rep["funnel"]["rates"].values())
    assert rep["validity"]["rate"] == 0.0


def test_missing_energy_rows_are_unevaluable(mini_config, tmp_path):
    (tmp_path / "e.csv").write_text("id,m1,m2\n")
    rep = run(mini_config.override(energies=str(tmp_path / "e.csv")))
    f = rep["funnel"]
    assert f["n_valid"] > 0
    assert f["n_unevaluable"] == f["n_valid"]
    assert f["n_stable"] == f["n_metastable"] == 0


def test_post_relaxation_mode(mini_config):
    rep = run(mini_config.override(evaluate="post"))
    assert rep["config"]["evaluate"] == "post"
    assert rep["model"]["n_submitted"] > 0


def test_config_echo_is_json(mini_report):
    echoed = RunConfig.from_dict(json.loads(to_json(mini_report["config"])))
    assert echoed.stability.metastable_max == 0.1
