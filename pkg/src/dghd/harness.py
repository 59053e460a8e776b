"""Seeded simulation studies: null calibration, power curves and subnetwork recovery.

Every replicate draws its randomness from ``SeedSequence([seed, replicate])``
so results do not depend on how replicates are spread over workers.
Replicate outputs are collected in index order before any summary is
computed, which keeps reports byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
from scipy import stats as sps

from .baselines import run_baseline
from .graph import ADJACENCY, TOPOLOGICAL_OVERLAP
from .netgen import GeneratorSpec, plant_differential, replicate_seed, shuffle_edges
from .stats import ghd_test
from .subnetwork import DetectionConfig, detect

KINDS = ("null_uniformity", "power_curve", "recovery")
POWER_METHODS = ("GHD", "MAD", "QAP", "CUG")
RECOVERY_METHODS = ("dGHD", "dHD")

DESK_REPLICATES = {"null_uniformity": 2000, "power_curve": 200, "recovery": 25}
FULL_REPLICATES = {"null_uniformity": 10000, "power_curve": 1000, "recovery": 100}
POWER_GAMMAS = (0.5, 0.7, 0.8, 0.84, 0.88, 0.93, 0.97, 1.0)
RECOVERY_GAMMAS = (0.055, 0.11, 0.23, 0.54, 0.79, 0.95)
QQ_PROBS = (0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99)

CSV_FIELDS = ("method", "gamma", "replicate", "metric", "value", "mc_stderr")


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one simulation study.

    Parameters
    ----------
    kind : {"null_uniformity", "power_curve", "recovery"}
    generator : GeneratorSpec
        Model for the first network; its ``seed`` field is ignored.
    replicates : int
    gammas : tuple of float
        Rewiring proportions (power curves and recovery).
    methods : tuple of str
        ``GHD, MAD, QAP, CUG`` for power curves, ``dGHD, dHD`` for recovery.
    detection : DetectionConfig
        Sweep settings for recovery; ``scheme`` is set per method.
    seed : int
    level : float
        Significance level at which "power" is counted.
    n_perm : int
        Draws for the MAD, QAP and CUG reference distributions.
    subnet_size : int
        Size of the planted differential node set.
    rewire : {"reinsert", "swap"}
    """

    kind: str
    generator: GeneratorSpec
    replicates: int = 0
    gammas: tuple = ()
    methods: tuple = ()
    detection: DetectionConfig = field(default_factory=lambda: DetectionConfig(n_min=50))
    seed: int = 0
    level: float = 0.05
    n_perm: int = 1000
    subnet_size: int = 200
    rewire: str = "reinsert"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; valid kinds: {', '.join(KINDS)}")
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.replicates == 0:
            object.__setattr__(self, "replicates", DESK_REPLICATES[self.kind])
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if any(not 0 <= g <= 1 for g in self.gammas):
            raise ValueError("every gamma must lie in [0, 1]")
        if self.kind == "power_curve":
            if not self.gammas:
                object.__setattr__(self, "gammas", POWER_GAMMAS)
            if not self.methods:
                object.__setattr__(self, "methods", POWER_METHODS)
            bad = [m for m in self.methods if m not in POWER_METHODS]
        elif self.kind == "recovery":
            if not self.gammas:
                object.__setattr__(self, "gammas", RECOVERY_GAMMAS)
            if not self.methods:
                object.__setattr__(self, "methods", RECOVERY_METHODS)
            bad = [m for m in self.methods if m not in RECOVERY_METHODS]
            if not 0 < self.subnet_size <= self.generator.n:
                raise ValueError("subnet_size must lie in [1, n]")
        else:
            if not self.methods:
                object.__setattr__(self, "methods", ("GHD",))
            bad = [m for m in self.methods if m != "GHD"]
        if bad:
            raise ValueError(f"methods {bad} not valid for {self.kind}")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "generator": self.generator.to_dict(),
            "replicates": self.replicates,
            "gammas": list(self.gammas),
            "methods": list(self.methods),
            "detection": self.detection.to_dict(),
            "seed": self.seed,
            "level": self.level,
            "n_perm": self.n_perm,
            "subnet_size": self.subnet_size,
            "rewire": self.rewire,
        }

    @classmethod
    def from_dict(cls, d: dict, full_scale: bool = False) -> "ExperimentConfig":
        known = {"kind", "generator", "replicates", "gammas", "methods", "detection", "seed",
                 "level", "n_perm", "subnet_size", "rewire"}
        extra = sorted(set(d) - known)
        if extra:
            raise ValueError(f"unknown experiment fields: {extra}")
        kw = dict(d)
        kw["generator"] = GeneratorSpec.from_dict(d["generator"])
        if "detection" in d:
            kw["detection"] = DetectionConfig(**d["detection"])
        if full_scale and not kw.get("replicates"):
            kw["replicates"] = FULL_REPLICATES.get(d.get("kind"), 0)
        return cls(**kw)


@dataclass(frozen=True)
class Record:
    method: str
    gamma: float | None
    replicate: int | None
    metric: str
    value: float
    mc_stderr: float | None = None


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list
    elapsed: float = 0.0
    workers: int = 1

    def select(self, metric: str, method: str | None = None, gamma: float | None = None,
               summary: bool = True) -> list:
        out = []
        for r in self.records:
            if r.metric != metric or (method is not None and r.method != method):
                continue
            if gamma is not None and (r.gamma is None or not math.isclose(r.gamma, gamma)):
                continue
            if summary and r.replicate is not None:
                continue
            out.append(r)
        return out

    def value(self, metric: str, method: str | None = None, gamma: float | None = None) -> Record:
        rows = self.select(metric, method, gamma)
        if len(rows) != 1:
            raise KeyError(f"expected one summary row for {metric}/{method}/{gamma}, found {len(rows)}")
        return rows[0]

    def samples(self, metric: str, method: str | None = None, gamma: float | None = None) -> np.ndarray:
        rows = [r for r in self.select(metric, method, gamma, summary=False) if r.replicate is not None]
        return np.array([r.value for r in rows], dtype=np.float64)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_FIELDS)
            for r in self.records:
                w.writerow([r.method, _fmt(r.gamma), "" if r.replicate is None else r.replicate,
                            r.metric, _fmt(r.value), _fmt(r.mc_stderr)])

    def metadata(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "replicate_seeds": f"SeedSequence([{self.config.seed}, replicate])",
            "workers": self.workers,
            "elapsed_seconds": round(self.elapsed, 3),
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "python": platform.python_version(),
            "numpy": np.__version__,
        }

    def write(self, csv_path) -> Path:
        """Write the CSV and a ``.json`` metadata sidecar next to it."""
        csv_path = Path(csv_path)
        self.write_csv(csv_path)
        side = csv_path.with_suffix(".json")
        side.write_text(json.dumps(self.metadata(), indent=2) + "\n", encoding="utf-8")
        return side


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _state_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint32)[0])


def _map(fn, count: int, workers: int) -> list:
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(count), chunksize=max(1, count // (4 * workers))))


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


# -- replicate bodies (module level so they pickle) -------------------------

def _null_replicate(cfg: ExperimentConfig, idx: int) -> float:
    sa, sb = replicate_seed(cfg.seed, idx).spawn(2)
    ga = cfg.generator.generate(seed=sa)
    gb = cfg.generator.generate(seed=sb)
    return ghd_test(ga, gb, TOPOLOGICAL_OVERLAP).p_association


def _power_replicate(cfg: ExperimentConfig, idx: int) -> list:
    base, *per_gamma = replicate_seed(cfg.seed, idx).spawn(1 + len(cfg.gammas))
    ga = cfg.generator.generate(seed=base)
    out = []
    for gamma, ss in zip(cfg.gammas, per_gamma):
        s_rewire, s_test = ss.spawn(2)
        gb = shuffle_edges(ga, gamma, s_rewire, method=cfg.rewire)
        row = []
        for m in cfg.methods:
            if m == "GHD":
                row.append(ghd_test(ga, gb, TOPOLOGICAL_OVERLAP).p_association)
            else:
                row.append(run_baseline(m, ga, gb, cfg.n_perm, _state_int(s_test)).p_value)
        out.append(row)
    return out


def _score(truth: np.ndarray, found: np.ndarray, n: int) -> tuple[float, float]:
    t = np.zeros(n, dtype=bool)
    t[truth] = True
    f = np.zeros(n, dtype=bool)
    f[found] = True
    tp = int(np.sum(t & f))
    fn = int(np.sum(t & ~f))
    fp = int(np.sum(~t & f))
    tn = int(np.sum(~t & ~f))
    tpr = tp / (tp + fn) if tp + fn else float("nan")
    spc = tn / (fp + tn) if fp + tn else float("nan")
    return tpr, spc


def _recovery_replicate(cfg: ExperimentConfig, idx: int) -> list:
    streams = replicate_seed(cfg.seed, idx).spawn(len(cfg.gammas))
    d = cfg.detection
    out = []
    for gamma, ss in zip(cfg.gammas, streams):
        ga, gb, vstar = plant_differential(cfg.generator, gamma, cfg.subnet_size, ss, cfg.rewire)
        row = []
        for m in cfg.methods:
            scheme = TOPOLOGICAL_OVERLAP if m == "dGHD" else ADJACENCY
            res = detect(ga, gb, DetectionConfig(d.alpha, d.n_min, d.batch, scheme, d.adjust))
            row.append(_score(vstar, res.nodes, ga.n))
        out.append(row)
    return out


# -- studies ------------------------------------------------------------------

def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = x[~np.isnan(x)]
    if len(x) == 0:
        return float("nan"), float("nan")
    se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("nan")
    return float(np.mean(x)), se


def run_null_uniformity(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """GHD p-values for independent pairs, with KS distance and a QQ table."""
    if cfg.kind != "null_uniformity":
        raise ValueError("config kind must be null_uniformity")
    t0 = time.perf_counter()
    p = np.array(_map(partial(_null_replicate, cfg), cfg.replicates, workers))
    recs = [Record("GHD", None, i, "p_value", float(v)) for i, v in enumerate(p)]
    ok = p[~np.isnan(p)]
    ks = sps.kstest(ok, "uniform")
    recs.append(Record("GHD", None, None, "ks_distance", float(ks.statistic)))
    recs.append(Record("GHD", None, None, "ks_pvalue", float(ks.pvalue)))
    for q in QQ_PROBS:
        # binomial SE of the empirical CDF at the uniform quantile q
        se = math.sqrt(q * (1 - q) / len(ok))
        recs.append(Record("GHD", None, None, f"qq_{q:g}", float(np.quantile(ok, q)), se))
    return ExperimentReport(cfg, recs, time.perf_counter() - t0, workers)


def run_power_curve(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Proportion of replicates accepting independence, per method and ``gamma``."""
    if cfg.kind != "power_curve":
        raise ValueError("config kind must be power_curve")
    t0 = time.perf_counter()
    res = np.array(_map(partial(_power_replicate, cfg), cfg.replicates, workers))
    # res[replicate, gamma, method]
    recs = []
    for gi, gamma in enumerate(cfg.gammas):
        for mi, m in enumerate(cfg.methods):
            col = res[:, gi, mi]
            recs.extend(Record(m, gamma, r, "p_value", float(v)) for r, v in enumerate(col))
            ok = col[~np.isnan(col)]
            power = float(np.mean(ok >= cfg.level)) if len(ok) else float("nan")
            se = math.sqrt(power * (1 - power) / len(ok)) if len(ok) else float("nan")
            recs.append(Record(m, gamma, None, "power", power, se))
    return ExperimentReport(cfg, recs, time.perf_counter() - t0, workers)


def run_recovery(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """TPR and SPC of planted-subnetwork detection, per method and ``gamma``."""
    if cfg.kind != "recovery":
        raise ValueError("config kind must be recovery")
    t0 = time.perf_counter()
    res = np.array(_map(partial(_recovery_replicate, cfg), cfg.replicates, workers))
    # res[replicate, gamma, method, (tpr, spc)]
    recs = []
    for gi, gamma in enumerate(cfg.gammas):
        for mi, m in enumerate(cfg.methods):
            for k, metric in enumerate(("TPR", "SPC")):
                col = res[:, gi, mi, k]
                recs.extend(Record(m, gamma, r, metric, float(v)) for r, v in enumerate(col))
                mean, se = _mean_se(col)
                recs.append(Record(m, gamma, None, metric, mean, se))
    return ExperimentReport(cfg, recs, time.perf_counter() - t0, workers)


RUNNERS = {
    "null_uniformity": run_null_uniformity,
    "power_curve": run_power_curve,
    "recovery": run_recovery,
}


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    return RUNNERS[cfg.kind](cfg, workers)


def load_config(path, full_scale: bool = False) -> ExperimentConfig:
    with Path(path).open(encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(json.load(fh), full_scale)
