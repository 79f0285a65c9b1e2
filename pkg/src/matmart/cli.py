"""Command-line entry point: ``matmart {bounds,entropy,simulate,verify,report}``.

Exit codes: 0 success, 1 a verification row failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, _line_of, load_config, parse_config
from .gls import theorem41_curve
from .moment_bounds import ConditionViolated, build_bound_profile
from .normed_space import analytic_kappa, entropy_profile, operator_tensor_set
from .verify import (
    AGGREGATION_NOTE,
    bound_check_report,
    empirical_moment,
    empirical_tail,
    model_moment_profile,
    normalized_norms,
    tensor_c_z,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

COLUMNS = {
    "bound_profile": ["p", "nu", "rho", "beta"],
    "tail_curve": ["t", "bound", "provenance"],
    "entropy": ["eps", "entropy", "cover_size", "used_in_fit"],
    "simulate_moments": ["p", "estimate", "stderr"],
    "simulate_tails": ["t", "frequency", "stderr", "lower", "upper"],
    "verify_report": ["kind", "x", "empirical", "stderr", "lower", "upper", "bound", "margin",
                      "verdict", "provenance"],
    "report": ["source", "x_name", "x", "y_name", "y"],
}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_plain) + "\n"


def write_table(out: Path, name: str, rows: list, meta: dict, fmt: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    cols = COLUMNS[name]
    if fmt == "csv":
        path = out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in cols])
        if meta:
            (out / f"{name}.meta.json").write_text(_dumps(meta))
        return path
    path = out / f"{name}.json"
    doc = {"columns": cols, "rows": [{c: r[c] for c in cols} for r in rows], "meta": meta}
    path.write_text(_dumps(doc))
    return path


def read_table(path: Path) -> tuple[list, dict]:
    """Rows and metadata from a CSV or JSON table written by ``write_table``."""
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        return doc["rows"], doc.get("meta", {})
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    meta_path = path.with_suffix(".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return rows, meta


# ---------------------------------------------------------------------------


def resolve_kappa(cfg: ExperimentConfig) -> tuple[float, dict]:
    spec = cfg.norm_spec()
    k = cfg.kappa_mode
    if k.mode == "analytic":
        value = analytic_kappa(spec) if k.value is None else float(k.value)
        return value, {"mode": "analytic", "value": value}
    prof = entropy_profile(operator_tensor_set(spec), k.eps_grid, k.cloud_size, cfg.seed)
    return prof.slope, {"mode": "estimated", "value": prof.slope, "intercept": prof.intercept}


def bound_inputs(cfg: ExperimentConfig):
    model = cfg.martingale_model()
    spec = cfg.norm_spec()
    kappa, kappa_meta = resolve_kappa(cfg)
    entry = cfg.entry_profile()
    if entry is None:
        profile = model_moment_profile(model, spec)
    else:
        profile = entry.scaled(tensor_c_z(spec) * model.modulation_bound)
    bound = build_bound_profile(profile, kappa, model.n, cfg.p_grid, cfg.beta_scale)
    tail = theorem41_curve(cfg.t_grid, bound)
    return model, spec, bound, tail, kappa_meta


def _bounds_meta(cfg, bound, kappa_meta) -> dict:
    return {
        "p_minus": bound.p_minus, "p_plus": bound.p_plus, "n": bound.n,
        "kappa": kappa_meta, "c_z": tensor_c_z(cfg.norm_spec()), "aggregation": AGGREGATION_NOTE,
        "beta_scale": bound.beta_scale, "profile": bound.profile.to_dict(),
        "provenance": {"beta": "moment chain nu -> rho -> beta",
                       "tail": "exp(-conjugate of beta at ln t)"},
    }


def cmd_bounds(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    _, _, bound, tail, kmeta = bound_inputs(cfg)
    meta = _bounds_meta(cfg, bound, kmeta)
    write_table(out, "bound_profile", list(bound.rows()), meta, cfg.output.format)
    write_table(out, "tail_curve", list(tail.rows()), {"provenance": tail.provenance}, cfg.output.format)
    return EXIT_OK


def cmd_entropy(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    spec = cfg.norm_spec()
    k = cfg.kappa_mode
    prof = entropy_profile(operator_tensor_set(spec), k.eps_grid, k.cloud_size, cfg.seed)
    meta = {"intercept": prof.intercept, "slope": prof.slope, "cloud_points": prof.cloud_points,
            "upper_bound": 2.0 * (spec.d - 1), "norm": spec.family, "d": spec.d}
    write_table(out, "entropy", list(prof.rows()), meta, cfg.output.format)
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    model, spec = cfg.martingale_model(), cfg.norm_spec()
    norms = normalized_norms(model, spec, cfg.paths, cfg.seed, threads)
    rows = []
    for p in cfg.p_values:
        est, se = empirical_moment(norms, p)
        rows.append({"p": float(p), "estimate": est, "stderr": se})
    meta = {"model": model.to_dict(), "norm": spec.family, "paths": cfg.paths, "seed": cfg.seed,
            "quantity": "||V(n)||"}
    write_table(out, "simulate_moments", rows, meta, cfg.output.format)
    tail = empirical_tail(norms / math.sqrt(model.n), cfg.t_grid)
    rows = [{"t": float(t), "frequency": float(f), "stderr": float(s), "lower": float(lo),
             "upper": float(hi)}
            for t, f, s, lo, hi in zip(tail.t, tail.frequency, tail.stderr, tail.lower, tail.upper)]
    write_table(out, "simulate_tails", rows, dict(meta, quantity="||V(n)|| / sqrt(n)"),
                cfg.output.format)
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    model, spec, bound, tail, kmeta = bound_inputs(cfg)
    report = bound_check_report(model, spec, bound, tail, cfg.paths, cfg.seed,
                                cfg.p_values, cfg.tail_paths, threads)
    meta = report.to_dict()
    meta.pop("rows")
    meta.update(_bounds_meta(cfg, bound, kmeta))
    meta["passed"] = report.passed
    if model.dependence == "sign_modulated":
        meta["dependence_note"] = "sign_modulated is a constructed dependent example"
    write_table(out, "verify_report", report.rows, meta, cfg.output.format)
    for r in report.failures:
        print(f"FAIL {r['kind']} x={r['x']:g}: empirical {r['empirical']:.6g} > bound {r['bound']:.6g}",
              file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_report(inputs: list, out: Path, fmt: str) -> int:
    """Merge prior tables into one long-format table for plotting."""
    merged = []
    for d in inputs:
        for path in sorted(Path(d).glob("*.csv")) + sorted(Path(d).glob("*.json")):
            name = path.name.split(".")[0]
            if name not in COLUMNS or name == "report" or path.name.endswith(".meta.json"):
                continue
            rows, _ = read_table(path)
            xcol = COLUMNS[name][0]
            for r in rows:
                for col in COLUMNS[name][1:]:
                    merged.append({"source": f"{Path(d).name}/{name}", "x_name": xcol, "x": r[xcol],
                                   "y_name": col, "y": r[col]})
    write_table(out, "report", merged, {"inputs": [str(i) for i in inputs]}, fmt)
    return EXIT_OK


COMMANDS = {
    "bounds": cmd_bounds,
    "entropy": cmd_entropy,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matmart", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS) + ["report"])
    parser.add_argument("inputs", nargs="*", help="report: directories of prior outputs")
    parser.add_argument("--config", help="JSON experiment config (defaults apply if omitted)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output directory (overrides output.path)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    parser.add_argument("--format", choices=["csv", "json"], help="override output.format")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config) if args.config else parse_config({})
        if args.seed is not None:
            cfg.seed = args.seed
        if args.format is not None:
            cfg.output.format = args.format
        if args.out is not None:
            cfg.output.path = args.out
        cfg = parse_config(cfg.to_dict())
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.output.path)
    if args.command == "report":
        return cmd_report(args.inputs or [str(out)], out, cfg.output.format)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(_dumps(cfg.to_dict()))
    try:
        return COMMANDS[args.command](cfg, out, args.threads)
    except ConditionViolated as exc:
        where = ""
        if args.config:
            where = f"{args.config}:{_line_of(Path(args.config).read_text(), 'moment_profile')}: "
        print(f"error: {where}{exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
