"""Command-line entry point: ``mistreatment {synth,train,baseline,postprocess,sweep,eval}``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
Outputs are written to temporary files and moved into place only when the
whole command succeeds, so a failed run leaves nothing behind.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np

from .baseline import BaselineConfig
from .ccp import CcpConfig
from .dataio import SchemaConfig, SplitPlan, fixture_path, load_csv, write_csv
from .experiment import MODES, SWEEP_COLUMNS, RunSettings, evaluate, sweep_thresholds
from .logistic import SolverConfig
from .metrics import disparate_impact_gap, error_report
from .synth import SETTINGS, generate_setting

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Outputs:
    """Stage files in temporaries; commit renames them, abort deletes them."""

    def __init__(self):
        self.staged: list[tuple[Path, Path]] = []

    def path(self, final) -> Path:
        final = Path(final)
        final.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{final.name}.", dir=final.parent)
        os.close(fd)
        self.staged.append((Path(tmp), final))
        return Path(tmp)

    def json(self, final, obj) -> None:
        self.path(final).write_text(json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n", encoding="utf-8")

    def commit(self) -> None:
        for tmp, final in self.staged:
            os.replace(tmp, final)
        self.staged.clear()

    def abort(self) -> None:
        for tmp, _ in self.staged:
            tmp.unlink(missing_ok=True)
        self.staged.clear()


def _resolve(path: str) -> Path:
    if path.startswith("fixture:"):
        return fixture_path(path[len("fixture:"):])
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {path}")
    return p


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(_resolve(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return cfg


def _section(cfg: dict, name: str, cls):
    raw = cfg.get(name, {})
    if not isinstance(raw, dict):
        raise UsageError(f"config section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise UsageError(f"unknown key(s) in config section {name!r}: {unknown}")
    return cls(**raw)


TOP_KEYS = {
    "data", "schema", "mode", "kinds", "m", "c", "epsilon", "delta", "max_rounds", "splits",
    "train_fraction", "seed", "grid", "rows", "jobs", "sensitive_feature", "out",
    "solver", "ccp", "baseline",
}


def _merged(args) -> dict:
    """Config-file values overridden by any flag given on the command line."""
    cfg = _load_config(getattr(args, "config", None))
    unknown = sorted(set(cfg) - TOP_KEYS)
    if unknown:
        raise UsageError(f"unknown config key(s): {unknown}")
    out = dict(cfg)
    for key, value in vars(args).items():
        if value is not None and key not in ("func", "config", "command"):
            out[key] = value
    return out


def _dataset(opts: dict):
    if "data" not in opts:
        raise UsageError("--data is required")
    path = _resolve(opts["data"])
    schema = SchemaConfig.load(_resolve(opts["schema"])) if opts.get("schema") else None
    if opts.get("sensitive_feature"):
        if schema is None:
            raise UsageError("--sensitive-feature needs --schema")
        schema = schema.with_sensitive_feature(True)
    return load_csv(path, schema)


def _plan(opts: dict) -> SplitPlan:
    return SplitPlan(
        repetitions=int(opts.get("splits", 5)),
        train_fraction=float(opts.get("train_fraction", 0.5)),
        seed=int(opts.get("seed", 0)),
    )


def _settings(opts: dict, mode: str) -> RunSettings:
    baseline = _section(opts, "baseline", BaselineConfig)
    overrides = {k: opts[k] for k in ("delta", "max_rounds") if k in opts}
    if "epsilon" in opts:
        overrides["epsilon"] = float(opts["epsilon"])
    if overrides:
        baseline = BaselineConfig(**{**baseline.__dict__, **overrides})
    ccp = _section(opts, "ccp", CcpConfig)
    return RunSettings(
        mode=mode,
        kinds=opts.get("kinds", "fpr"),
        m=None if opts.get("m") is None else float(opts["m"]),
        c=None if opts.get("c") is None else float(opts["c"]),
        epsilon=float(opts.get("epsilon", 0.01)),
        solver=_section(opts, "solver", SolverConfig),
        ccp=ccp,
        baseline=baseline,
    )


def cmd_synth(args) -> int:
    if args.setting not in SETTINGS:
        raise UsageError(f"unknown setting {args.setting}; expected one of {sorted(SETTINGS)}")
    data = generate_setting(args.setting, args.seed)
    out = _Outputs()
    try:
        write_csv(data, out.path(args.out))
        out.commit()
    finally:
        out.abort()
    return EXIT_OK


def _train(args, mode: str) -> int:
    opts = _merged(args)
    mode = opts.get("mode", mode) if mode is None else mode
    if mode is None:
        raise UsageError("--mode is required")
    if "out" not in opts:
        raise UsageError("--out is required")
    data = _dataset(opts)
    settings = _settings(opts, mode)
    result = evaluate(data, settings, _plan(opts), int(opts.get("jobs", 1)))
    outdir = Path(opts["out"])
    model = {
        "feature_names": list(data.feature_names),
        "settings": result["settings"],
        "plan": result["plan"],
        "splits": [
            {"split": s["split"], **{k: s[k] for k in ("model", "threshold_rule") if k in s}}
            for s in result["splits"]
        ],
    }
    metrics = {
        "mode": mode,
        "uses_sensitive_at_decision": mode == "postprocess",
        "splits": [
            {"split": s["split"], "test_metrics": s["test_metrics"], "test_covariances": s["test_covariances"]}
            for s in result["splits"]
        ],
        "average": result["average"],
    }
    out = _Outputs()
    try:
        out.json(outdir / "model.json", model)
        out.json(outdir / "metrics.json", metrics)
        out.commit()
    finally:
        out.abort()
    avg = result["average"]
    print(
        f"{mode}: accuracy {avg['accuracy']:.4f}  d_fpr {_fmt(avg['d_fpr'])}  d_fnr {_fmt(avg['d_fnr'])}"
        f"  -> {outdir}"
    )
    return EXIT_OK


def _fmt(v):
    return "n/a" if v is None else f"{v:+.4f}"


def cmd_train(args) -> int:
    return _train(args, None)


def _parse_grid(text) -> list[float]:
    if isinstance(text, list):
        items = text
    else:
        items = [t for t in str(text).split(",") if t.strip()]
    try:
        grid = [float(t) for t in items]
    except ValueError:
        raise UsageError(f"malformed grid {text!r}; expected comma-separated numbers") from None
    if not grid or any(not 0 <= m <= 1 for m in grid):
        raise UsageError(f"grid {text!r} must list multipliers in [0, 1]")
    return grid


def cmd_sweep(args) -> int:
    opts = _merged(args)
    grid = _parse_grid(opts.get("grid", "1,0.5,0.1,0"))
    if "out" not in opts:
        raise UsageError("--out is required")
    data = _dataset(opts)
    settings = _settings(opts, "unconstrained")
    res = sweep_thresholds(
        data, settings.kinds, grid, settings.solver, settings.ccp, _plan(opts), int(opts.get("jobs", 1))
    )
    columns = ["m"] + [f"{c}_mean" for c in SWEEP_COLUMNS[2:]]
    out = _Outputs()
    try:
        with open(out.path(opts["out"]), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(columns)
            for row in res["averages"]:
                w.writerow(["" if row[c] is None else repr(float(row[c])) for c in columns])
        if opts.get("rows"):
            with open(out.path(opts["rows"]), "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(SWEEP_COLUMNS)
                for row in res["rows"]:
                    w.writerow(["" if row[c] is None else row[c] for c in SWEEP_COLUMNS])
        out.commit()
    finally:
        out.abort()
    return EXIT_OK


def _read_predictions(path, column):
    with open(_resolve(path), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise UsageError(f"{path}: empty predictions file") from None
        if column is None:
            if len(header) != 1:
                raise UsageError(f"{path}: several columns {header}; pick one with --column")
            column = header[0]
        if column not in header:
            raise UsageError(f"{path}: no column {column!r}")
        j = header.index(column)
        mapping = {"1": 1, "+1": 1, "0": -1, "-1": -1}
        pred = []
        for row in reader:
            if not row:
                continue
            v = row[j].strip()
            if v not in mapping:
                raise UsageError(f"{path}, line {reader.line_num}: prediction {v!r} not in {{1, +1, 0, -1}}")
            pred.append(mapping[v])
    return np.array(pred)


def cmd_eval(args) -> int:
    opts = _merged(args)
    data = _dataset(opts)
    pred = _read_predictions(args.predictions, args.column)
    if pred.size != data.n:
        raise UsageError(f"row-count mismatch: {pred.size} predictions for {data.n} data rows")
    report = error_report(data.labels, pred, data.sensitive).to_dict()
    report["disparate_impact_gap"] = disparate_impact_gap(pred, data.sensitive)
    text = json.dumps(_jsonable(report), indent=2, allow_nan=False) + "\n"
    if opts.get("out"):
        out = _Outputs()
        try:
            out.path(opts["out"]).write_text(text, encoding="utf-8")
            out.commit()
        finally:
            out.abort()
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_data(p):
    p.add_argument("--data", help="CSV file, or fixture:<name> for a bundled file")
    p.add_argument("--schema", help="JSON schema config (default: numeric features plus y and z columns)")
    p.add_argument("--sensitive-feature", dest="sensitive_feature", action="store_const", const=True,
                   help="also feed z to the model as a feature")


def _add_training(p, with_mode=True, with_threshold=True):
    _add_data(p)
    p.add_argument("--config", help="JSON config; flags given on the command line win")
    if with_mode:
        p.add_argument("--mode", choices=MODES)
    p.add_argument("--kinds", help="fpr, fnr, omr, or a comma list such as fpr,fnr (alias: both)")
    if with_threshold:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--m", type=float, help="covariance multiplier in [0, 1]")
        g.add_argument("--c", type=float, help="absolute covariance threshold")
    p.add_argument("--epsilon", type=float, help="disparity target for baseline and postprocess")
    p.add_argument("--delta", type=float, help="baseline penalty increment")
    p.add_argument("--max-rounds", dest="max_rounds", type=int)
    p.add_argument("--splits", type=int, help="number of random train/test splits")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mistreatment", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic setting as CSV")
    p.add_argument("--setting", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train and evaluate over repeated splits")
    _add_training(p)
    p.set_defaults(func=cmd_train)

    for name in ("baseline", "postprocess"):
        p = sub.add_parser(name, help=f"shorthand for train --mode {name}")
        _add_training(p, with_mode=False)
        p.set_defaults(func=lambda a, n=name: _train(a, n))

    p = sub.add_parser("sweep", help="fairness-accuracy tradeoff over a multiplier grid")
    _add_training(p, with_mode=False, with_threshold=False)
    p.add_argument("--grid", help="comma-separated multipliers, e.g. 1,0.5,0.1,0")
    p.add_argument("--rows", help="also write per-split rows to this CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="error-rate report for a predictions file")
    _add_data(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--column")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
