"""Command-line front end: ``mixrip <command> [flags]``.

Every run needs a seed. A JSON ``--config`` file is merged under the flags
(flags win), unknown keys are rejected, and each run writes
``<out>/<command>-<seed>.csv`` plus a ``.json`` sidecar holding the config.

Exit codes: 0 on success, 1 when an experiment assertion fails, 2 on a
usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .experiments import EXPERIMENTS, ExperimentConfig, format_csv_value, jsonable
from .frequencies import sample_frequencies, stream
from .kernels import KernelSpec, coherence_threshold
from .mixtures import LocationFamily, SignedMixture
from .ripbounds import rip_report
from .sketch import SketchOperator, sketch_points, sketch_signed_mixture

COMMANDS = ("rip", *EXPERIMENTS, "sample-freqs", "sketch")
_RUN_KEYS = {"out", "superset", "input"}
_ALLOWED = {f.name for f in dataclasses.fields(ExperimentConfig)} | _RUN_KEYS


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v]


def _float_list(text: str) -> list:
    return [float(v) for v in text.split(",") if v]


def _str_list(text: str) -> list:
    return [v for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed (required, here or in --config)")
    common.add_argument("--config", type=Path, help="JSON file of parameters; flags override it")
    common.add_argument("--out", type=Path, help="output directory (default: current directory)")
    common.add_argument("--threads", type=int, help="worker threads (default: logical cores)")
    common.add_argument("--base", choices=("dirac", "gaussian"))
    common.add_argument("--d", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--m", type=int)
    common.add_argument("--s", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--tau", type=float)
    common.add_argument("--scheme", choices=("iid", "orthochi", "hd"))
    common.add_argument("--kmax", type=int)
    common.add_argument("--replicates", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--grid", type=int)
    common.add_argument("--box", type=float, help="side length of the parameter box [0, box]^d")
    common.add_argument("--budget", type=int, help="supremum search seeds")
    common.add_argument("--refine", type=int, help="seeds polished by local search")
    common.add_argument("--max-iter", dest="max_iter", type=int)
    common.add_argument("--secants", type=int)
    common.add_argument("--ms", type=_int_list, help="comma-separated sketch sizes")
    common.add_argument("--dims", type=_int_list, help="comma-separated dimensions")
    common.add_argument("--taus", type=_float_list, help="comma-separated tau grid")
    common.add_argument("--schemes", type=_str_list, help="comma-separated frequency schemes")
    common.add_argument("--superset", action="store_true", default=None,
                        help="search unconstrained monopole-dipole and dipole-pair domains")
    common.add_argument("--input", type=Path, help="points CSV or signed-mixture JSON to sketch")
    parser = argparse.ArgumentParser(prog="mixrip", description="Sketch operators and restricted isometry bounds "
                                     "for separated mixtures.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    helps = {
        "rip": "deterministic restricted isometry bound for one operator",
        "variance": "variance of the sketch norm against the Gaussian-matrix comparator",
        "psitail": "tail of psi against Hoeffding and Bernstein curves",
        "psimm": "second moment of psi_mm for three weight functions",
        "tails": "tail of the mean of ||omega||^3",
        "inequalities": "pointwise checks of the auxiliary inequalities",
        "ripprob": "exceedance fractions over operator draws",
        "legacy": "growth of the weighted-feature lower bound",
        "sample-freqs": "draw a frequency matrix",
        "sketch": "sketch a point cloud or signed mixture",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def merge_config(args: argparse.Namespace) -> dict:
    """Config file values overridden by explicit flags."""
    merged = {}
    if args.config is not None:
        try:
            merged = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(merged, dict):
            raise ConfigurationError("config file must hold a JSON object")
        merged.pop("command", None)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
    merged |= {k: (str(v) if isinstance(v, Path) else v) for k, v in flags.items()}
    unknown = sorted(set(merged) - _ALLOWED)
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {', '.join(unknown)}")
    if merged.get("seed") is None:
        raise ConfigurationError("a seed is required (--seed or config)")
    merged.setdefault("threads", os.cpu_count() or 1)
    return merged


def _split(merged: dict):
    run = {k: merged[k] for k in _RUN_KEYS if k in merged}
    cfg = ExperimentConfig.from_dict({k: v for k, v in merged.items() if k not in _RUN_KEYS})
    return cfg, run


def _write_pairs(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["quantity", "value"])
        for k, v in rows:
            wr.writerow([k, format_csv_value(v)])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(jsonable(obj), indent=2) + "\n")


def _table(rows) -> None:
    width = max(len(str(r[0])) for r in rows) if rows else 0
    for r in rows:
        print(f"{str(r[0]):<{width}}  " + "  ".join(str(v) for v in r[1:]))


def _kernel(cfg: ExperimentConfig) -> KernelSpec:
    return KernelSpec(cfg.get("base", "dirac"), cfg.get("s", 1.0), cfg.get("d", 2))


def run_rip(cfg: ExperimentConfig, run: dict, out: Path) -> int:
    spec = _kernel(cfg)
    k = cfg.get("k", 2)
    eps = cfg.get("eps", coherence_threshold(spec, k))
    family = LocationFamily(spec, eps, 0.0, cfg.get("box", 5.0 * eps))
    freqs = sample_frequencies(spec, cfg.get("m", 4096), cfg.get("scheme", "iid"), cfg.seed)
    rep = rip_report(SketchOperator(freqs, spec), family, k, budget=cfg.get("budget", 4096),
                     refine=cfg.get("refine", 32), max_iter=cfg.get("max_iter", 200), rng=stream(cfg.seed, 1),
                     superset=bool(run.get("superset", False)))
    body = json.loads(rep.to_json())
    stem = out / f"rip-{cfg.seed}"
    _write_json(stem.with_suffix(".json"), {"config": cfg.to_dict() | run, "report": body})
    scalars = [(k_, v) for k_, v in body.items() if not isinstance(v, (dict, list))]
    _write_pairs(stem.with_suffix(".csv"), [(k_, np.nan if v is None else v) for k_, v in scalars])
    _table([(k_, format_csv_value(v)) for k_, v in scalars])
    return 0


def run_sample_freqs(cfg: ExperimentConfig, run: dict, out: Path) -> int:
    spec = _kernel(cfg)
    freqs = sample_frequencies(spec, cfg.get("m", 1024), cfg.get("scheme", "iid"), cfg.seed)
    stem = out / f"sample-freqs-{cfg.seed}"
    freqs.to_csv(stem.with_suffix(".csv"))
    freqs.to_binary(stem.with_suffix(".bin"))
    _write_json(stem.with_suffix(".json"), {"config": cfg.to_dict() | run, "kernel": spec.to_dict(),
                                            "d": freqs.d, "m": freqs.m, "scheme": freqs.scheme,
                                            "block_size": freqs.block_size, "binary": stem.name + ".bin"})
    _table([("d", freqs.d), ("m", freqs.m), ("scheme", freqs.scheme)])
    return 0


def _read_input(path: Path):
    text = path.read_text()
    if path.suffix == ".json":
        return SignedMixture.from_list(json.loads(text))
    try:
        pts = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        pts = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
    return pts


def run_sketch(cfg: ExperimentConfig, run: dict, out: Path) -> int:
    if "input" not in run:
        raise ConfigurationError("sketch needs --input (points CSV or signed-mixture JSON)")
    data = _read_input(Path(run["input"]))
    d = data.dim if isinstance(data, SignedMixture) else data.shape[1]
    if cfg.d is not None and cfg.d != d:
        raise ConfigurationError(f"--d {cfg.d} does not match the input dimension {d}")
    spec = KernelSpec(cfg.get("base", "dirac"), cfg.get("s", 1.0), d)
    op = SketchOperator(sample_frequencies(spec, cfg.get("m", 1024), cfg.get("scheme", "iid"), cfg.seed), spec)
    sk = sketch_signed_mixture(op, data) if isinstance(data, SignedMixture) else sketch_points(op, data)
    stem = out / f"sketch-{cfg.seed}"
    sk.to_csv(stem.with_suffix(".csv"))
    norm2 = float(np.sum(np.abs(sk.values) ** 2))
    _write_json(stem.with_suffix(".json"), {"config": cfg.to_dict() | run, "kernel": spec.to_dict(),
                                            "m": op.m, "sketch_norm_sq": norm2})
    _table([("m", op.m), ("sketch_norm_sq", format_csv_value(norm2))])
    return 0


def run_experiment(name: str, cfg: ExperimentConfig, run: dict, out: Path) -> int:
    res = EXPERIMENTS[name](cfg)
    res.config |= run
    res.write(out, f"{name}-{cfg.seed}")
    _table([(a["name"], "PASS" if a["passed"] else "FAIL", a["detail"]) for a in res.assertions])
    print(f"runtime {res.runtime:.1f} s")
    return 0 if res.passed else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        merged = merge_config(args)
        cfg, run = _split(merged)
        out = Path(run.get("out", "."))
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "rip":
            return run_rip(cfg, run, out)
        if args.command == "sample-freqs":
            return run_sample_freqs(cfg, run, out)
        if args.command == "sketch":
            return run_sketch(cfg, run, out)
        return run_experiment(args.command, cfg, run, out)
    except (ConfigurationError, ValueError, TypeError) as exc:
        print(f"mixrip: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
