"""Train/evaluate over repeated splits, and the fairness-accuracy sweep.

Every mode is fitted on the train side of each split and scored on the test
side. Jobs can run in a process pool; results are always returned in split
(and grid) order, so output never depends on completion order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .baseline import BaselineConfig, train_baseline
from .ccp import CcpConfig, TrainReport, train_constrained
from .constraints import ConstraintSpec, covariance, parse_kinds
from .data import Dataset, predict, signed_distance
from .dataio import SplitPlan, make_splits
from .logistic import SolverConfig, fit_logistic, nll_and_grad
from .metrics import average_reports, disparate_impact_gap, error_report
from .postprocess import apply_group_thresholds, fit_group_thresholds

MODES = ("unconstrained", "constrained", "baseline", "postprocess")


@dataclass(frozen=True)
class RunSettings:
    mode: str = "unconstrained"
    kinds: tuple = ("fpr",)
    m: float | None = None
    c: float | None = None
    epsilon: float = 0.01
    solver: SolverConfig = field(default_factory=SolverConfig)
    ccp: CcpConfig = field(default_factory=CcpConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        object.__setattr__(self, "kinds", tuple(k.value for k in parse_kinds(self.kinds)))
        if self.mode == "constrained":
            if (self.m is None) == (self.c is None):
                raise ValueError("constrained mode needs exactly one of m or c")
            self.constraint_spec()
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def constraint_spec(self) -> ConstraintSpec:
        if self.m is not None:
            return ConstraintSpec(self.kinds, multipliers=self.m)
        return ConstraintSpec(self.kinds, thresholds=self.c)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "kinds": list(self.kinds),
            "m": self.m,
            "c": self.c,
            "epsilon": self.epsilon,
            "solver": asdict(self.solver),
            "ccp": asdict(self.ccp),
            "baseline": asdict(self.baseline),
        }


def _unconstrained_report(train: Dataset, solver: SolverConfig) -> TrainReport:
    fit = fit_logistic(train, solver)
    if not np.all(np.isfinite(fit.boundary.theta)):
        raise FloatingPointError("unconstrained training diverged")
    return TrainReport(
        boundary=fit.boundary,
        method="unconstrained",
        outer_iterations=fit.iterations,
        converged=fit.converged,
        objective=nll_and_grad(fit.boundary, train).value,
        details={"grad_norm": fit.grad_norm},
    )


def run_split(data: Dataset, train_idx, test_idx, settings: RunSettings, seed: int = 0) -> dict:
    """Fit on the train rows, evaluate on the test rows; returns a JSON-ready dict."""
    train, test = data.subset(train_idx), data.subset(test_idx)
    rule = None
    if settings.mode == "constrained":
        cfg = replace(settings.ccp, seed=seed)
        report = train_constrained(train, settings.constraint_spec(), settings.solver, cfg)
    elif settings.mode == "baseline":
        report = train_baseline(train, settings.kinds, settings.baseline, settings.solver)
    else:
        report = _unconstrained_report(train, settings.solver)
    boundary = report.boundary

    if settings.mode == "postprocess":
        rule = fit_group_thresholds(
            signed_distance(boundary, train.features), train.labels, train.sensitive, settings.kinds, settings.epsilon
        )
        pred = apply_group_thresholds(rule, signed_distance(boundary, test.features), test.sensitive, seed)
    else:
        pred = predict(boundary, test.features)

    metrics = error_report(test.labels, pred, test.sensitive).to_dict()
    metrics["disparate_impact_gap"] = disparate_impact_gap(pred, test.sensitive)
    metrics["uses_sensitive_at_decision"] = settings.mode == "postprocess"
    out = {
        "model": report.to_dict(data.feature_names),
        "test_metrics": metrics,
        "test_covariances": {},
    }
    if rule is not None:
        out["threshold_rule"] = rule.to_dict()
    if test.sensitive.min() != test.sensitive.max():
        for k in settings.kinds:
            out["test_covariances"][k] = covariance(k, test, boundary)
    return out


def _run_job(args):
    data, tr, te, settings, seed = args
    return run_split(data, tr, te, settings, seed)


def _map(fn, jobs_args, jobs: int):
    if jobs <= 1 or len(jobs_args) <= 1:
        return [fn(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, jobs_args))


def evaluate(data: Dataset, settings: RunSettings, plan: SplitPlan = SplitPlan(), jobs: int = 1) -> dict:
    splits = make_splits(data, plan)
    args = [(data, tr, te, settings, plan.seed + r) for r, (tr, te) in enumerate(splits)]
    results = _map(_run_job, args, jobs)
    for r, res in enumerate(results):
        res["split"] = r
    metric_avg = average_reports([
        {k: v for k, v in res["test_metrics"].items() if not isinstance(v, bool)} for res in results
    ])
    metric_avg["uses_sensitive_at_decision"] = settings.mode == "postprocess"
    return {
        "settings": settings.to_dict(),
        "splits": results,
        "average": metric_avg,
        "plan": asdict(plan),
    }


SWEEP_COLUMNS = (
    "m", "split", "accuracy", "d_fpr", "d_fnr",
    "fpr_z0", "fpr_z1", "fnr_z0", "fnr_z1", "covariance",
)


def sweep_thresholds(
    data: Dataset,
    kinds,
    m_grid,
    solver: SolverConfig = SolverConfig(),
    cfg: CcpConfig = CcpConfig(),
    plan: SplitPlan = SplitPlan(),
    jobs: int = 1,
) -> dict:
    """Constrained training over a grid of multipliers.

    Returns ``{"rows": [...], "averages": [...]}``; ``rows`` holds one entry per
    (m, split) and ``averages`` one per m, both in grid order. The covariance
    column is the test covariance summed in absolute value over the kinds.
    """
    grid = [float(m) for m in m_grid]
    if not grid:
        raise ValueError("the multiplier grid is empty")
    for m in grid:
        if not 0 <= m <= 1:
            raise ValueError(f"multiplier {m} outside [0, 1]")
    kinds = tuple(k.value for k in parse_kinds(kinds))
    splits = make_splits(data, plan)
    args = []
    for m in grid:
        settings = RunSettings("constrained", kinds, m=m, solver=solver, ccp=cfg)
        args += [(data, tr, te, settings, plan.seed + r) for r, (tr, te) in enumerate(splits)]
    results = _map(_run_job, args, jobs)

    rows = []
    for idx, res in enumerate(results):
        m = grid[idx // len(splits)]
        t = res["test_metrics"]
        rows.append(
            {
                "m": m,
                "split": idx % len(splits),
                **{c: t[c] for c in SWEEP_COLUMNS[2:-1]},
                "covariance": float(sum(abs(v) for v in res["test_covariances"].values())),
                "converged": res["model"]["converged"],
            }
        )
    averages = []
    for m in grid:
        mine = [{k: v for k, v in r.items() if k not in ("m", "split", "converged")} for r in rows if r["m"] == m]
        avg = average_reports(mine)
        averages.append({"m": m, **{f"{k}_mean": v for k, v in avg.items()}})
    return {"kinds": list(kinds), "rows": rows, "averages": averages}
