"""Command-line interface.

    datathin thin             thin every row of a CSV file
    datathin verify           fresh-draw verification of one config or the bundled matrix
    datathin changepoint-sim  null / alternative changepoint simulations
    datathin changepoint-run  changepoint pipeline on a CSV series

Settings come from ``--config`` (JSON) and are overridden by flags.  The seed
is mandatory.  Exit codes: 0 success, 1 verification failed, 2 bad
configuration, 3 runtime error.  Errors go to stderr as JSON
``{"code", "message", "field"}``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import changepoint as cp
from .distributions import DistributionSpec, Family, is_scalar
from .errors import (
    ConfigError,
    InvalidGamma,
    InvalidNu,
    InvalidParameter,
    NonIntegerAllocation,
    ShapeMismatch,
    ThinningError,
    UnknownRequiredParameter,
    UnsupportedFamily,
)
from .folds import Mode, ThinningPlan
from .mcmc import McmcConfig
from .rng import RngState
from .thinners import default_unknown, thin
from .verify import fisher_additivity_check, load_matrix, run_verification

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

# errors that mean "the request was wrong" rather than "the run broke"
_CONFIG_ERRORS = (
    ConfigError,
    InvalidParameter,
    UnknownRequiredParameter,
    NonIntegerAllocation,
    UnsupportedFamily,
    ShapeMismatch,
    InvalidNu,
    InvalidGamma,
)

COMMANDS = ("thin", "verify", "changepoint-sim", "changepoint-run")

_CONFIG_KEYS = {
    "command", "seed", "spec", "plan", "mcmc", "B", "R", "alpha", "penalty", "min_segment",
    "window", "scenario", "n", "method", "input", "out", "threads", "matrix", "fisher",
}


@dataclass
class RunConfig:
    command: str
    seed: int
    spec: DistributionSpec | None = None
    plan: ThinningPlan | None = None
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    B: int = 100_000
    R: int = 1000
    alpha: float = 0.05
    penalty: float = 10.0
    min_segment: int = 10
    window: int = 10
    scenario: str = "null"
    n: int = 2000
    method: str = "Thinned"
    input: str | None = None
    out: str = "."
    threads: int = 1
    matrix: bool = False
    fisher: bool = False


def _parse_params(text: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for item in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in item:
            raise ConfigError(f"--params item {item!r} is not key=value", field="params")
        key, value = (s.strip() for s in item.split("=", 1))
        try:
            if ";" in value:
                out[key] = [float(v) for v in value.split(";")]
            else:
                number = float(value)
                out[key] = int(number) if number.is_integer() and "." not in value and "e" not in value.lower() else number
        except ValueError as exc:
            raise ConfigError(f"--params value {value!r} for {key!r} is not numeric", field="params") from exc
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="datathin", description="Thin draws into independent folds.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--seed")
        p.add_argument("--family")
        p.add_argument("--params")
        p.add_argument("--unknown", help="comma-separated unknown parameter names")
        p.add_argument("--mode")
        p.add_argument("--K", type=int)
        p.add_argument("--eps", help="comma-separated weights, e.g. 3/10,7/10")
        p.add_argument("--fold-sizes", dest="fold_sizes")
        p.add_argument("--nu", type=float)
        p.add_argument("--B", type=int)
        p.add_argument("--R", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--penalty", type=float)
        p.add_argument("--min-segment", dest="min_segment", type=int)
        p.add_argument("--window", type=int)
        p.add_argument("--scenario", choices=("null", "alternative"))
        p.add_argument("--method", choices=("Naive", "Thinned"))
        p.add_argument("--input")
        p.add_argument("--out")
        p.add_argument("--threads", type=int)
        if name == "verify":
            p.add_argument("--matrix", action="store_true", default=None)
            p.add_argument("--fisher", action="store_true", default=None)
    return parser


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", field="config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg}", field="config") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", field="config")
    extra = set(data) - _CONFIG_KEYS
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}", field=sorted(extra)[0])
    return data


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the JSON config with flags (flags win) and validate everything."""
    data = _load_json(args.config) if args.config else {}
    if data.get("command", args.command) != args.command:
        raise ConfigError(f"config is for {data['command']!r}, not {args.command!r}", field="command")

    seed = args.seed if args.seed is not None else data.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (--seed or config 'seed')", field="seed")
    try:
        seed = int(seed)
        RngState(seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError("seed must be an unsigned 64-bit integer", field="seed") from exc

    spec_data = dict(data.get("spec") or {})
    if args.family:
        if args.family != spec_data.get("family"):
            spec_data = {"family": args.family}
    if args.params:
        spec_data.setdefault("params", {})
        spec_data["params"] = {**spec_data["params"], **_parse_params(args.params)}
    if args.unknown is not None:
        spec_data["unknown"] = [u for u in args.unknown.split(",") if u]

    plan_data = dict(data.get("plan") or {})
    for key, value in (("K", args.K), ("mode", args.mode), ("nu", args.nu)):
        if value is not None:
            plan_data[key] = value
    if args.eps:
        plan_data["eps"] = [w.strip() for w in args.eps.split(",")]
        plan_data.setdefault("K", len(plan_data["eps"]))
    if args.fold_sizes:
        plan_data["fold_sizes"] = [int(v) for v in args.fold_sizes.split(",")]
    if args.K is not None and not args.eps and "eps" in plan_data and len(plan_data["eps"]) != args.K:
        del plan_data["eps"]

    spec = plan = None
    if spec_data:
        if "family" not in spec_data:
            raise ConfigError("spec needs a family", field="family")
        try:
            Family(spec_data["family"])
        except ValueError as exc:
            raise ConfigError(f"unknown family {spec_data['family']!r}", field="family") from exc
        mode = plan_data.get("mode", Mode.CONVOLUTION.value)
        if "unknown" not in spec_data:
            spec_data["unknown"] = list(default_unknown(spec_data["family"], mode))
        spec = DistributionSpec.from_json(spec_data)
    if plan_data:
        plan = ThinningPlan.from_json(plan_data)

    cfg = RunConfig(command=args.command, seed=seed, spec=spec, plan=plan)
    if "mcmc" in data:
        cfg.mcmc = McmcConfig.from_json(data["mcmc"])
    for key in ("B", "R", "alpha", "penalty", "min_segment", "window", "scenario", "n", "method", "input", "out", "threads", "matrix", "fisher"):
        value = getattr(args, key, None)
        if value is None:
            value = data.get(key)
        if value is not None:
            setattr(cfg, key, value)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.B < 1:
        raise ConfigError("B must be >= 1", field="B")
    if cfg.R < 0:
        raise ConfigError("R must be >= 0", field="R")
    if not 0 < cfg.alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)", field="alpha")
    if cfg.min_segment < 1:
        raise ConfigError("min_segment must be >= 1", field="min_segment")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1", field="threads")
    if not math.isfinite(cfg.penalty) or cfg.penalty < 0:
        raise ConfigError("penalty must be a finite number >= 0", field="penalty")
    if cfg.command == "thin":
        if cfg.spec is None or cfg.plan is None:
            raise ConfigError("thin needs a spec (--family/--params) and a plan (--K)", field="spec")
        if cfg.input is None:
            raise ConfigError("thin needs --input", field="input")
    if cfg.command == "verify" and not cfg.matrix and (cfg.spec is None or cfg.plan is None):
        raise ConfigError("verify needs a spec and plan, or --matrix", field="spec")
    if cfg.command == "changepoint-run" and cfg.input is None:
        raise ConfigError("changepoint-run needs --input", field="input")
    if cfg.spec is not None and cfg.plan is not None and cfg.spec.family not in _families_for(cfg.plan.mode):
        from .thinners import _refuse

        _refuse(cfg.spec.family, cfg.plan.mode)


def _families_for(mode):
    from .thinners import _MODES

    return _MODES[mode]


# -- commands ----------------------------------------------------------------

def _read_table(path) -> tuple[list[str], np.ndarray]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ConfigError(f"cannot read input: {exc.strerror}", field="input") from exc
    if not rows:
        raise ConfigError("input CSV is empty", field="input")
    header = [h.strip() for h in rows[0]]
    try:
        values = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigError("input CSV must be numeric below the header", field="input") from exc
    if values.size == 0:
        values = values.reshape(0, len(header))
    if values.shape[1] != len(header):
        raise ConfigError("ragged input CSV", field="input")
    return header, values


def _fmt(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)


def _out_path(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def cmd_thin(cfg: RunConfig) -> int:
    header, table = _read_table(cfg.input)
    spec, plan = cfg.spec, cfg.plan
    records = plan.mode in (Mode.SPLIT, Mode.MEAN_VARIANCE)
    vector = not is_scalar(spec.family)
    if spec.family in (Family.POISSON, Family.BINOMIAL, Family.NEG_BINOMIAL, Family.MULTINOMIAL):
        x = table.astype(np.int64) if np.all(table == np.floor(table)) else table
    else:
        x = table
    if not (records or vector):
        x = x if x.shape[1] > 1 else x[:, 0]
    fs = thin(x, spec, plan, RngState(cfg.seed).generator(), cfg.mcmc)
    target = fs.indirect_stat if fs.indirect_stat is not None else x
    residual = np.abs(np.asarray(fs.recombiner(fs.folds), dtype=float) - np.asarray(target, dtype=float))
    residual = residual.reshape(residual.shape[0], -1).max(axis=1) if residual.size else np.zeros(0)

    columns, blocks = [], []
    for k, fold in enumerate(fs.folds, start=1):
        fold = np.asarray(fold).reshape(len(table), -1)
        if plan.mode is Mode.SPLIT:
            names = [f"fold{k}_{j + 1}" for j in range(fold.shape[1])]
        elif plan.mode is Mode.MEAN_VARIANCE:
            names = [f"fold{k}"]
        else:
            names = [f"{h}_fold{k}" for h in header]
        columns += names
        blocks.append(fold)
    body = np.concatenate(blocks + [residual[:, None]], axis=1) if len(table) else np.zeros((0, len(columns) + 1))
    path = _out_path(cfg, "thin.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns + ["residual"])
        for row in body:
            w.writerow([_fmt(v) for v in row])
    with open(_out_path(cfg, "foldspecs.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {"recombiner": str(fs.recombiner), "fold_specs": [s.to_json() for s in fs.fold_specs]},
            fh,
            indent=2,
            ensure_ascii=False,
        )
    return EXIT_OK


def _write_report(cfg, name, report):
    with open(_out_path(cfg, f"{name}.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json_text())
    with open(_out_path(cfg, f"{name}.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())


def cmd_verify(cfg: RunConfig) -> int:
    root = RngState(cfg.seed)
    if cfg.matrix:
        matrix = load_matrix()
        summary, ok = [], True
        for name, spec, plan in matrix["configs"]:
            report = run_verification(plan.mode, spec, plan, cfg.B, root.split_named(name), mcmc_cfg=cfg.mcmc, threads=cfg.threads)
            _write_report(cfg, name, report)
            summary.append({"name": name, "verdict": report.verdict, "reasons": report.reasons})
            ok &= report.passed
        with open(_out_path(cfg, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
        return EXIT_OK if ok else EXIT_FAIL
    report = run_verification(cfg.plan.mode, cfg.spec, cfg.plan, cfg.B, root, mcmc_cfg=cfg.mcmc, threads=cfg.threads)
    if cfg.fisher:
        report.fisher_check = fisher_additivity_check(cfg.spec, cfg.plan, cfg.B, root.split_named("fisher"))
    _write_report(cfg, "report", report)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_changepoint_sim(cfg: RunConfig) -> int:
    result = cp.simulate(
        cfg.scenario,
        cfg.R,
        RngState(cfg.seed),
        n=cfg.n,
        penalty=cfg.penalty,
        min_segment=cfg.min_segment,
        alpha=cfg.alpha,
        threads=cfg.threads,
    )
    with open(_out_path(cfg, "replicates.csv"), "w", encoding="utf-8") as fh:
        fh.write(result.replicate_csv())
    with open(_out_path(cfg, "aggregate.csv"), "w", encoding="utf-8") as fh:
        fh.write(result.aggregate_csv())
    return EXIT_OK


def cmd_changepoint_run(cfg: RunConfig) -> int:
    x = cp.read_series(cfg.input)
    root = RngState(cfg.seed)
    result = cp.run_pipeline(x, cfg.method, cfg.penalty, cfg.min_segment, cfg.alpha, root.split(0))
    with open(_out_path(cfg, "result.json"), "w", encoding="utf-8") as fh:
        fh.write(cp.result_json(result))
    if cfg.R > 1 and cfg.method == "Thinned":
        stab = cp.stability_analysis(x, cfg.R, cfg.window, cfg.penalty, cfg.min_segment, cfg.alpha, root)
        with open(_out_path(cfg, "stability.csv"), "w", encoding="utf-8") as fh:
            fh.write(stab.to_csv())
    return EXIT_OK


_HANDLERS = {
    "thin": cmd_thin,
    "verify": cmd_verify,
    "changepoint-sim": cmd_changepoint_sim,
    "changepoint-run": cmd_changepoint_run,
}


def _emit(err: ThinningError):
    print(json.dumps(err.to_dict(), ensure_ascii=False), file=sys.stderr)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return EXIT_OK
        _emit(ConfigError("invalid command line", field=None))
        return EXIT_CONFIG
    try:
        cfg = build_config(args)
    except ThinningError as err:
        _emit(err)
        return EXIT_CONFIG
    try:
        return _HANDLERS[cfg.command](cfg)
    except _CONFIG_ERRORS as err:
        _emit(err)
        return EXIT_CONFIG
    except ThinningError as err:
        _emit(err)
        return EXIT_RUNTIME
    except OSError as err:
        _emit(ThinningError(f"I/O error: {err.strerror or err}", field="out"))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
