"""Command-line interface: ``dghd compare | subnetwork | generate | infer | experiment``.

Exit status is 0 on success, 1 on an internal or numerical failure and 2 on
a usage or input error.  Every run writes ``<command>.config.json`` to the
output directory with the fully resolved settings, including the seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import secrets
import sys
import time
from pathlib import Path

from . import baselines, harness
from .graph import (SCHEMES, TOPOLOGICAL_OVERLAP, DegenerateInputError, GraphError, read_edgelist, weights,
                    write_edgelist)
from .infer import (DEFAULT_MAX_FEATURES, DEFAULT_POWER, DEFAULT_TAU, NA_POLICIES, MatrixFormatError,
                    correlation_adjacency, load_matrix, write_omega)
from .netgen import MODELS, GeneratorSpec
from .stats import DEFAULT_DIAG_THRESHOLD, ghd_test, monte_carlo_pvalue
from .subnetwork import DetectionConfig, detect

log = logging.getLogger("dghd")

COMPARE_METHODS = ("GHD",) + baselines.METHODS
COMPARE_FIELDS = ("method", "statistic", "z", "p_value", "mc_stderr", "n_draws", "diag_a", "diag_b")


class UsageError(Exception):
    """Invalid combination of command-line values."""


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return x


def _write_rows(rows, fields, path: Path, fmt: str) -> Path:
    path = path.with_suffix("." + fmt)
    if fmt == "json":
        clean = [{k: (None if isinstance(r.get(k), float) and math.isnan(r[k]) else r.get(k)) for k in fields}
                 for r in rows]
        path.write_text(json.dumps(clean, indent=2) + "\n", encoding="utf-8")
    else:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(fields)
            for r in rows:
                w.writerow([_fmt(r.get(k)) for k in fields])
    return path


def _sidecar(args, resolved: dict) -> Path:
    out = Path(args.output_dir) / f"{args.command}.config.json"
    meta = {"command": args.command, "seed": args.seed, "threads": args.threads,
            "output_format": args.format, "settings": resolved,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    out.write_text(json.dumps(meta, indent=2, default=str) + "\n", encoding="utf-8")
    return out


def _load_pair(a, b):
    ga = read_edgelist(a)
    gb = read_edgelist(b)
    sa, sb = set(ga.labels), set(gb.labels)
    if sa != sb:
        raise GraphError(f"node sets differ; symmetric difference: {sorted(sa ^ sb)}")
    if ga.labels != gb.labels:
        pos = {lab: k for k, lab in enumerate(gb.labels)}
        gb = gb.relabel([pos[lab] for lab in ga.labels])
    return ga, gb


def _parse_methods(text: str, valid) -> list[str]:
    if text.strip().lower() == "all":
        return list(valid)
    lookup = {m.lower(): m for m in valid}
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok.lower() not in lookup:
            raise UsageError(f"unknown method {tok!r}; valid methods: {', '.join(valid)}, all")
        out.append(lookup[tok.lower()])
    return out


# -- subcommands ---------------------------------------------------------------

def cmd_compare(args) -> int:
    methods = _parse_methods(args.methods, COMPARE_METHODS)
    ga, gb = _load_pair(args.graph_a, args.graph_b)
    rows = []
    for m in methods:
        if m == "GHD":
            res = ghd_test(ga, gb, args.scheme)
            row = {"method": "GHD", "statistic": res.statistic, "z": res.z, "p_value": res.p_value,
                   "n_draws": 0, "diag_a": res.diag_a.ratio, "diag_b": res.diag_b.ratio}
            if args.permute:
                mc = monte_carlo_pvalue(weights(ga, args.scheme), weights(gb, args.scheme),
                                        args.n_perm, args.seed)
                row.update(p_value=mc.p_value, mc_stderr=mc.stderr, n_draws=mc.n_perm)
            for side in ("diag_a", "diag_b"):
                v = row[side]
                if not math.isnan(v) and v > args.diag_threshold:
                    print(f"warning: normality diagnostic {side}={v:.4g} exceeds {args.diag_threshold}; "
                          "consider --permute", file=sys.stderr)
        else:
            res = baselines.run_baseline(m, ga, gb, args.n_perm, args.seed)
            row = {"method": m, "statistic": res.statistic, "p_value": res.p_value,
                   "mc_stderr": baselines.binomial_se(res.p_value, res.n_draws) if res.defined else float("nan"),
                   "n_draws": res.n_draws}
        rows.append(row)
    out = _write_rows(rows, COMPARE_FIELDS, Path(args.output_dir) / "compare", args.format)
    for r in rows:
        print(f"{r['method']}\tstatistic={r['statistic']:.6g}\tp={r['p_value']:.4g}")
    _sidecar(args, {"graph_a": args.graph_a, "graph_b": args.graph_b, "methods": methods,
                    "scheme": args.scheme, "n_perm": args.n_perm, "permute": args.permute,
                    "diag_threshold": args.diag_threshold, "result": str(out)})
    return 0


def cmd_subnetwork(args) -> int:
    ga, gb = _load_pair(args.graph_a, args.graph_b)
    if args.n_min >= ga.n:
        raise UsageError(f"--n-min {args.n_min} must be smaller than the network size {ga.n}")
    scheme = TOPOLOGICAL_OVERLAP if args.method == "dghd" else "adjacency"
    cfg = DetectionConfig(args.alpha, args.n_min, args.batch, scheme, args.adjust)
    res = detect(ga, gb, cfg)
    out = Path(args.output_dir)
    vfile = out / "vstar.txt"
    vfile.write_text("".join(lab + "\n" for lab in res.labels), encoding="utf-8")
    res.trace.write_csv(out / "trace.csv")
    print(f"detected {len(res.labels)} node(s)" + (f" at K={res.k_star}" if res.k_star else ""))
    _sidecar(args, {"graph_a": args.graph_a, "graph_b": args.graph_b, "method": args.method,
                    **cfg.to_dict(), "vstar": str(vfile), "trace": str(out / "trace.csv")})
    return 0


def cmd_generate(args) -> int:
    params = {"RG2D": {"d": args.d}, "SF": {"alpha": args.alpha}, "ER": {"p": args.p}}[args.model]
    if None in params.values():
        flag = {"RG2D": "--d", "SF": "--alpha", "ER": "--p"}[args.model]
        raise UsageError(f"model {args.model} needs {flag}")
    spec = GeneratorSpec(args.model, args.n, params, args.seed)
    g = spec.generate()
    path = Path(args.out) if args.out else Path(args.output_dir) / "graph.tsv"
    write_edgelist(g, path)
    print(f"wrote {g.n} nodes and {g.n_edges} edges to {path}")
    _sidecar(args, {**spec.to_dict(), "out": str(path)})
    return 0


def cmd_infer(args) -> int:
    data = load_matrix(args.matrix, args.matrix_format, args.na_policy)
    if data.dropped:
        print(f"dropped {len(data.dropped)} feature(s) with missing values", file=sys.stderr)
    g, omega = correlation_adjacency(data, args.b, args.tau, args.max_features, return_omega=True)
    path = Path(args.out) if args.out else Path(args.output_dir) / "network.tsv"
    write_edgelist(g, path)
    if args.omega:
        write_omega(omega, g.labels, args.omega)
    print(f"wrote {g.n} nodes and {g.n_edges} edges to {path}")
    _sidecar(args, {"matrix": args.matrix, "b": args.b, "tau": args.tau, "na_policy": args.na_policy,
                    "max_features": args.max_features, "dropped": list(data.dropped),
                    "out": str(path), "omega": args.omega})
    return 0


def cmd_experiment(args) -> int:
    raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if "seed" not in raw:
        raw["seed"] = args.seed
    if "kind" in raw and raw["kind"] not in harness.KINDS:
        raise UsageError(f"unknown experiment kind {raw['kind']!r}; valid kinds: {', '.join(harness.KINDS)}")
    model = raw.get("generator", {}).get("model")
    if model not in MODELS:
        raise UsageError(f"unknown model {model!r}; valid models: {', '.join(MODELS)}")
    cfg = harness.ExperimentConfig.from_dict(raw, args.full_scale)
    report = harness.run_experiment(cfg, args.threads)
    path = Path(args.output_dir) / f"{Path(args.config).stem}_report.csv"
    report.write(path)
    print(f"wrote {len(report.records)} rows to {path}")
    _sidecar(args, {"config": args.config, "experiment": cfg.to_dict(), "report": str(path)})
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="master seed (drawn and recorded when omitted)")
    common.add_argument("--threads", type=int, default=harness.default_workers(),
                        help="worker processes for experiments (default: available cores)")
    common.add_argument("-o", "--output-dir", default=".", help="directory for result files")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="result file format")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dghd", description="Compare labelled networks with the GHD.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compare", parents=[common], help="test two networks for independence")
    c.add_argument("graph_a")
    c.add_argument("graph_b")
    c.add_argument("--methods", default="GHD", help="comma list of GHD, MAD, QAP, CUG, or 'all'")
    c.add_argument("--scheme", choices=SCHEMES, default=TOPOLOGICAL_OVERLAP)
    c.add_argument("--n-perm", type=int, default=1000, help="permutation / simulation draws")
    c.add_argument("--permute", action="store_true", help="Monte Carlo p-value for GHD")
    c.add_argument("--diag-threshold", type=float, default=DEFAULT_DIAG_THRESHOLD)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("subnetwork", parents=[common], help="detect a differential subnetwork")
    s.add_argument("graph_a")
    s.add_argument("graph_b")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--n-min", type=int, default=10)
    s.add_argument("--batch", type=int, default=1)
    s.add_argument("--method", choices=("dghd", "dhd"), default="dghd")
    s.add_argument("--adjust", choices=("BH", "bonferroni", "none"), default="BH")
    s.set_defaults(func=cmd_subnetwork)

    g = sub.add_parser("generate", parents=[common], help="draw a random network")
    g.add_argument("--model", required=True, help=f"one of {', '.join(MODELS)}")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=float, help="RG2D radius")
    g.add_argument("--alpha", type=float, help="SF exponent")
    g.add_argument("--p", type=float, help="ER edge probability")
    g.add_argument("--out", help="edge-list path (default: <output-dir>/graph.tsv)")
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("infer", parents=[common], help="build a correlation network from a data matrix")
    i.add_argument("matrix")
    i.add_argument("--b", type=float, default=DEFAULT_POWER)
    i.add_argument("--tau", type=float, default=DEFAULT_TAU)
    i.add_argument("--matrix-format", choices=("csv", "tsv"), default=None)
    i.add_argument("--na-policy", choices=NA_POLICIES, default="error")
    i.add_argument("--max-features", type=int, default=DEFAULT_MAX_FEATURES)
    i.add_argument("--out", help="edge-list path (default: <output-dir>/network.tsv)")
    i.add_argument("--omega", help="also write omega values to this TSV")
    i.set_defaults(func=cmd_infer)

    e = sub.add_parser("experiment", parents=[common], help="run a simulation study from a JSON config")
    e.add_argument("config")
    e.add_argument("--full-scale", action="store_true", help="use full replicate counts")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.seed is None:
        args.seed = secrets.randbits(32)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    if args.command == "generate" and args.model not in MODELS:
        print(f"error: unknown model {args.model!r}; valid models: {', '.join(MODELS)}", file=sys.stderr)
        return 2
    try:
        Path(args.output_dir).mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except (UsageError, GraphError, MatrixFormatError, DegenerateInputError, FileNotFoundError,
            IsADirectoryError, json.JSONDecodeError, KeyError, ValueError) as exc:
        msg = exc
        if isinstance(exc, FileNotFoundError):
            msg = f"no such file: {exc.filename}"
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
