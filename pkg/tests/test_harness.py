import csv
import json
import math

import numpy as np
import pytest

from dghd.harness import (
    ExperimentConfig,
    _score,
    load_config,
    run_experiment,
    run_null_uniformity,
    run_power_curve,
    run_recovery,
)
from dghd.netgen import GeneratorSpec
from dghd.subnetwork import DetectionConfig

RG = GeneratorSpec("RG2D", 60, {"d": 0.3})


def test_config_defaults_and_validation():
    cfg = ExperimentConfig("power_curve", RG)
    assert cfg.replicates == 200
    assert cfg.methods == ("GHD", "MAD", "QAP", "CUG")
    assert 0.84 in cfg.gammas and 0.93 in cfg.gammas
    assert ExperimentConfig("recovery", RG, subnet_size=20).gammas[0] == 0.055
    with pytest.raises(ValueError, match="kind"):
        ExperimentConfig("bogus", RG)
    with pytest.raises(ValueError, match="gamma"):
        ExperimentConfig("power_curve", RG, gammas=(1.5,))
    with pytest.raises(ValueError, match="methods"):
        ExperimentConfig("recovery", RG, methods=("GHD",), subnet_size=20)
    with pytest.raises(ValueError):
        ExperimentConfig("null_uniformity", RG, replicates=-1)


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig("recovery", RG, replicates=3, gammas=(0.1,), subnet_size=20,
                           detection=DetectionConfig(n_min=15), seed=9)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert load_config(p) == cfg


def test_single_replicate_null_report():
    rep = run_null_uniformity(ExperimentConfig("null_uniformity", RG, replicates=1))
    assert len(rep.samples("p_value")) == 1


def test_kind_mismatch_rejected():
    with pytest.raises(ValueError):
        run_power_curve(ExperimentConfig("null_uniformity", RG, replicates=1))


def test_gamma_zero_power_is_zero():
    cfg = ExperimentConfig("power_curve", RG, replicates=5, gammas=(0.0,), n_perm=200)
    rep = run_power_curve(cfg)
    for m in cfg.methods:
        assert rep.value("power", m, 0.0).value == 0.0


def test_gamma_one_sparse_graphs_near_independent():
    spec = GeneratorSpec("RG2D", 100, {"d": 0.1})
    cfg = ExperimentConfig("power_curve", spec, replicates=30, gammas=(1.0,), n_perm=200, seed=2)
    rep = run_power_curve(cfg)
    for m in cfg.methods:
        assert rep.value("power", m, 1.0).value >= 0.8


def test_score_definitions():
    tpr, spc = _score(np.array([0, 1, 2, 3]), np.array([0, 1, 7]), 10)
    assert tpr == 0.5 and spc == pytest.approx(5 / 6)
    tpr, spc = _score(np.arange(10), np.arange(10), 10)
    assert tpr == 1.0 and math.isnan(spc)


def test_recovery_whole_network_has_missing_spc(tmp_path):
    cfg = ExperimentConfig("recovery", RG, replicates=2, gammas=(0.1,), methods=("dGHD",),
                           subnet_size=60, detection=DetectionConfig(n_min=20))
    rep = run_recovery(cfg)
    assert rep.value("TPR", "dGHD", 0.1).value == 1.0
    assert math.isnan(rep.value("SPC", "dGHD", 0.1).value)
    rep.write(tmp_path / "r.csv")
    rows = list(csv.DictReader((tmp_path / "r.csv").open()))
    spc = [r for r in rows if r["metric"] == "SPC" and r["replicate"] == ""]
    assert spc[0]["value"] == ""


def test_reports_identical_across_worker_counts(tmp_path):
    cfg = ExperimentConfig("power_curve", RG, replicates=6, gammas=(0.5, 0.9), n_perm=100, seed=5)
    outs = []
    for w in (1, 2):
        p = tmp_path / f"w{w}.csv"
        run_experiment(cfg, workers=w).write(p)
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_sidecar_records_config_and_seed(tmp_path):
    cfg = ExperimentConfig("null_uniformity", RG, replicates=3, seed=17)
    side = run_experiment(cfg).write(tmp_path / "n.csv")
    meta = json.loads(side.read_text())
    assert meta["config"]["seed"] == 17
    assert meta["config"]["generator"]["params"] == {"d": 0.3}
    assert "17" in meta["replicate_seeds"]


def test_every_summary_row_has_stderr():
    cfg = ExperimentConfig("power_curve", RG, replicates=4, gammas=(0.9,), n_perm=100)
    rep = run_power_curve(cfg)
    for r in rep.records:
        if r.replicate is None:
            assert r.mc_stderr is not None and not math.isnan(r.mc_stderr)
