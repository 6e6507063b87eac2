"""Reweighting baseline for disparate mistreatment.

Train an ordinary logistic model, find the group with the higher error rate,
freeze the set P of that group's errors of the constrained type, then keep
retraining with a growing extra weight C on P until the training disparity
drops to epsilon or the round budget runs out. With both FPR and FNR the two
penalty sets are kept separately and only those still over epsilon grow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ccp import TrainReport
from .constraints import MistreatmentKind, parse_kinds
from .data import Boundary, Dataset, partition_by_sensitive, predict
from .logistic import SolverConfig, fit_logistic, nll_and_grad
from .metrics import error_report


@dataclass(frozen=True)
class BaselineConfig:
    epsilon: float = 0.01
    delta: float = 1.0
    max_rounds: int = 200

    def __post_init__(self):
        if not self.epsilon > 0 or not self.delta > 0:
            raise ValueError("epsilon and delta must be positive")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be nonnegative")


def _disparities(data: Dataset, theta) -> tuple[dict, float]:
    rep = error_report(data.labels, predict(Boundary(theta), data.features), data.sensitive)
    return {"fpr": rep.d_fpr, "fnr": rep.d_fnr}, rep.accuracy


def train_baseline(
    data: Dataset,
    kinds,
    cfg: BaselineConfig = BaselineConfig(),
    solver: SolverConfig = SolverConfig(),
) -> TrainReport:
    kinds = parse_kinds(kinds)
    if MistreatmentKind.OMR in kinds:
        raise ValueError("the baseline supports fpr and fnr only")
    part = partition_by_sensitive(data)
    if part.n0 == 0 or part.n1 == 0:
        raise ValueError("the baseline needs both sensitive groups present")

    fit = fit_logistic(data, solver)
    theta = fit.boundary.theta
    disp, acc = _disparities(data, theta)
    pred = predict(fit.boundary, data.features)
    y, z = data.labels, data.sensitive

    # per kind: worse-off group s, frozen penalty set P, running penalty C
    state = {}
    for k in kinds:
        d = disp[k.value]
        if d is None:
            raise ValueError(f"{k.value} disparity undefined: a group has no samples of the needed label")
        s = 0 if d > 0 else 1
        label = -1 if k is MistreatmentKind.FPR else 1
        P = (z == s) & (y == label) & (pred != y)
        state[k] = {"group": s, "mask": P, "penalty": 0.0, "sign": 1.0 if s == 0 else -1.0}

    def oriented(k, disp):
        return state[k]["sign"] * disp[k.value]

    trace = []
    rounds = 0
    while rounds < cfg.max_rounds:
        active = [k for k in kinds if oriented(k, disp) > cfg.epsilon]
        if not active:
            break
        for k in active:
            state[k]["penalty"] += cfg.delta
        w = np.ones(data.n)
        for k in kinds:
            w += state[k]["penalty"] * state[k]["mask"]
        fit = fit_logistic(data, solver, weights=w, theta0=theta)
        theta = fit.boundary.theta
        disp, acc = _disparities(data, theta)
        rounds += 1
        trace.append(
            {
                "round": rounds,
                "penalties": {k.value: state[k]["penalty"] for k in kinds},
                "d_fpr": disp["fpr"],
                "d_fnr": disp["fnr"],
                "accuracy": acc,
            }
        )

    met = all(disp[k.value] is not None and abs(disp[k.value]) <= cfg.epsilon for k in kinds)
    boundary = Boundary(theta)
    return TrainReport(
        boundary=boundary,
        method="baseline",
        outer_iterations=rounds,
        converged=met,
        trace=trace,
        objective=nll_and_grad(boundary, data).value,
        details={
            "target_met": met,
            "rounds": rounds,
            "exhausted": rounds >= cfg.max_rounds and not met,
            "epsilon": cfg.epsilon,
            "delta": cfg.delta,
            "penalties": {k.value: state[k]["penalty"] for k in kinds},
            "penalized_groups": {k.value: state[k]["group"] for k in kinds},
            "penalty_set_sizes": {k.value: int(state[k]["mask"].sum()) for k in kinds},
            "train_disparities": {k.value: disp[k.value] for k in kinds},
        },
    )
