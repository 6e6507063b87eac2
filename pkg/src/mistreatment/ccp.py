"""Fairness-constrained logistic regression via the penalty convex-concave procedure.

Each kind k contributes two one-sided constraints on the covariance proxy,
cov_k <= c_k and -cov_k <= c_k. Both are differences of convex functions. At
every outer iteration the concave half of each is replaced by its tangent at
the current iterate, which gives a convex upper bound that is exact at that
point. The resulting convex problem

    minimise   f(theta) + tau * sum(s)
    subject to convexified_j(theta) <= c_j + s_j,   s_j >= 0

is solved with SLSQP, and tau grows geometrically up to ``tau_max``. Here f is
the regularised NLL divided by N so that tau is on the scale of accuracy loss
per unit covariance.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .constraints import ConstraintSpec, DCSplit, MistreatmentKind, covariance
from .data import Boundary, Dataset, partition_by_sensitive
from .logistic import SolverConfig, _loss_terms, fit_logistic


@dataclass(frozen=True)
class CcpConfig:
    tau0: float = 0.5
    mu: float = 1.5
    tau_max: float = 1e4
    max_outer_iters: int = 100
    sub_tol: float = 1e-6
    tol: float = 1e-5
    feas_tol: float = 1e-6
    sub_max_iter: int = 300
    max_cuts: int = 60
    cut_tol: float = 1e-10
    init: str = "unconstrained"
    seed: int = 0
    floor: float = 1e-2
    restarts: int = 0

    def __post_init__(self):
        if self.tau0 <= 0 or self.mu <= 1 or self.tau_max < self.tau0:
            raise ValueError("need tau0 > 0, mu > 1 and tau_max >= tau0")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")
        if self.init not in ("unconstrained", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class TrainReport:
    boundary: Boundary
    method: str
    outer_iterations: int = 0
    converged: bool = True
    final_slacks: dict = field(default_factory=dict)
    final_covariances: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    objective: float = float("nan")
    trace: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self, feature_names=None) -> dict:
        out = {
            "method": self.method,
            "boundary": self.boundary.to_dict(feature_names),
            "outer_iterations": self.outer_iterations,
            "converged": bool(self.converged),
            "final_slacks": dict(self.final_slacks),
            "final_covariances": dict(self.final_covariances),
            "thresholds": dict(self.thresholds),
            "objective": self.objective,
            "trace": [dict(t) for t in self.trace],
            "details": dict(self.details),
        }
        return out


class _Problem:
    """Caches everything the outer loop needs for one dataset."""

    def __init__(self, data: Dataset, kinds, thresholds: dict, l2: float):
        self.data = data
        self.Xa = data.augmented()
        self.y = data.labels.astype(float)
        self.w = np.ones(data.n)
        self.l2 = l2
        self.n = data.n
        part = partition_by_sensitive(data)
        self.kinds = list(kinds)
        self.splits = [DCSplit.build(k, data, part) for k in self.kinds]
        self.c = np.array([thresholds[k] for k in self.kinds])
        # direction of steepest NLL descent at theta = 0
        self.ascent = 0.5 * np.mean(self.Xa * self.y[:, None], axis=0)
        self.floor = -np.inf

    def objective(self, theta):
        value, grad, _ = _loss_terms(theta, self.Xa, self.y, self.w, self.l2)
        return value / self.n, grad / self.n

    def covariances(self, theta) -> np.ndarray:
        return np.array([sp.value(theta) / self.n for sp in self.splits])

    def violations(self, theta) -> np.ndarray:
        """True slacks, ordered (upper_k, lower_k) for each kind."""
        cov = self.covariances(theta)
        return np.maximum(0.0, np.column_stack([cov - self.c, -cov - self.c]).ravel())

    def merit(self, theta, tau) -> float:
        return self.objective(theta)[0] + tau * float(np.sum(self.violations(theta)))

    def convexified(self, theta_k):
        """Convex surrogates of (cov_k, -cov_k) linearised at theta_k.

        Returns a function theta -> (values, jacobian) in covariance units.
        """
        n = self.n
        pieces = []
        for sp in self.splits:
            cc_val, cc_grad = sp.concave(theta_k)
            cv_val, cv_grad = sp.convex(theta_k)
            pieces.append((sp, cc_val, cc_grad, cv_val, cv_grad))

        def surrogate(theta):
            vals, jac = [], []
            dt = theta - theta_k
            for sp, cc_val, cc_grad, cv_val, cv_grad in pieces:
                v, g = sp.convex(theta)
                vals.append((v + cc_val + cc_grad @ dt) / n)
                jac.append((g + cc_grad) / n)
                v, g = sp.concave(theta)
                vals.append((-v - cv_val - cv_grad @ dt) / n)
                jac.append((-g - cv_grad) / n)
            return np.array(vals), np.array(jac)

        return surrogate


def _solve_subproblem(prob: _Problem, theta_k, tau, cfg: CcpConfig):
    """Kelley cutting planes on the piecewise-linear surrogates, SLSQP on the rest.

    Every cut is a supporting hyperplane of a convex surrogate, so the cut model
    is a relaxation that tightens until the true surrogates hold to ``cut_tol``.
    """
    surrogate = prob.convexified(theta_k)
    p = theta_k.size
    m = 2 * len(prob.kinds)
    c = np.repeat(prob.c, 2)
    vals, jac = surrogate(theta_k)
    x = np.concatenate([theta_k, np.maximum(0.0, vals - c)])

    # divided by (1 + tau) so the slack and loss terms stay on comparable scales
    scale = 1.0 / (1.0 + tau)

    def fun(x):
        f, g = prob.objective(x[:p])
        return scale * (f + tau * np.sum(x[p:])), scale * np.concatenate([g, np.full(m, tau)])

    rows, rhs = [], []
    floor_row = None
    if np.isfinite(prob.floor):
        floor_row = np.concatenate([prob.ascent, np.zeros(m)])
    bounds = [(None, None)] * p + [(0.0, None)] * m
    res = None
    for _ in range(cfg.max_cuts):
        gap = vals - c - x[p:]
        if res is not None and np.max(gap) <= cfg.cut_tol:
            break
        theta = x[:p]
        for j in range(m):
            # vals_j + jac_j (t - theta) <= c_j + s_j
            row = np.concatenate([jac[j], -np.eye(m)[j]])
            rows.append(row)
            rhs.append(c[j] - vals[j] + jac[j] @ theta)
        G = np.array(rows)
        h = np.array(rhs)
        constraints = [{"type": "ineq", "fun": lambda x, G=G, h=h: h - G @ x, "jac": lambda x, G=G: -G}]
        if floor_row is not None:
            constraints.append(
                {"type": "ineq", "fun": lambda x: floor_row @ x - prob.floor, "jac": lambda x: floor_row}
            )
        res = minimize(
            fun,
            x,
            jac=True,
            method="SLSQP",
            bounds=bounds,
            constraints=constraints,
            options={"ftol": cfg.sub_tol * 1e-4, "maxiter": cfg.sub_max_iter},
        )
        if not np.all(np.isfinite(res.x)):
            raise FloatingPointError("convex subproblem diverged")
        x = res.x
        vals, jac = surrogate(x[:p])
    return x[:p], res


def _run_ccp(prob: _Problem, theta, cfg: CcpConfig):
    tau = cfg.tau0
    trace = []
    converged = False
    for it in range(1, cfg.max_outer_iters + 1):
        before = prob.merit(theta, tau)
        cand, res = _solve_subproblem(prob, theta, tau, cfg)
        after = prob.merit(cand, tau)
        accepted = bool(after <= before)
        if accepted:
            theta = cand
        viol = prob.violations(theta)
        trace.append(
            {
                "iteration": it,
                "tau": tau,
                "objective": prob.objective(theta)[0],
                "total_slack": float(np.sum(viol)),
                "merit_before": before,
                "merit_after": after if accepted else before,
                "accepted": accepted,
                "covariances": {k.value: float(v) for k, v in zip(prob.kinds, prob.covariances(theta))},
                "subproblem_status": int(res.status),
            }
        )
        change = before - (after if accepted else before)
        if change <= cfg.tol and np.sum(viol) <= cfg.feas_tol:
            converged = True
            break
        if change <= cfg.tol and tau >= cfg.tau_max:
            break
        tau = min(cfg.mu * tau, cfg.tau_max)
    return prob.objective(theta)[0], theta, converged, trace


def train_constrained(
    data: Dataset,
    spec: ConstraintSpec,
    solver: SolverConfig = SolverConfig(),
    cfg: CcpConfig = CcpConfig(),
    theta0=None,
) -> TrainReport:
    part = partition_by_sensitive(data)
    if part.n0 == 0 or part.n1 == 0:
        raise ValueError("constrained training needs both sensitive groups present")

    base = fit_logistic(data, solver)
    reference = {k: covariance(k, data, base.boundary) for k in spec.kinds}
    thresholds = spec.resolve(reference)
    prob = _Problem(data, spec.kinds, thresholds, solver.l2)

    theta_unc = base.boundary.theta
    if cfg.floor > 0:
        prob.floor = cfg.floor * float(prob.ascent @ theta_unc)

    if theta0 is not None:
        starts = [np.array(theta0, dtype=float)]
    elif cfg.init == "random":
        starts = []
    else:
        starts = [theta_unc.copy()]
    rng = np.random.default_rng(cfg.seed)
    n_random = cfg.restarts + (1 if not starts else 0)
    for _ in range(n_random):
        u = rng.standard_normal(theta_unc.size)
        u *= np.linalg.norm(theta_unc) / np.linalg.norm(u)
        starts.append(u if prob.ascent @ u >= 0 else -u)

    runs = [_run_ccp(prob, t, cfg) for t in starts]
    # feasible runs first, then the lowest objective; ties keep the earliest start
    best = min(
        range(len(runs)),
        key=lambda i: (not runs[i][2], runs[i][0] if runs[i][2] else float(np.sum(prob.violations(runs[i][1])))),
    )
    _, theta, converged, trace = runs[best]
    it = len(trace)

    boundary = Boundary(theta)
    cov = prob.covariances(theta)
    viol = prob.violations(theta)
    slacks = {}
    for i, k in enumerate(prob.kinds):
        slacks[f"{k.value}_upper"] = float(viol[2 * i])
        slacks[f"{k.value}_lower"] = float(viol[2 * i + 1])
    return TrainReport(
        boundary=boundary,
        method="constrained",
        outer_iterations=it,
        converged=converged,
        final_slacks=slacks,
        final_covariances={k.value: float(v) for k, v in zip(prob.kinds, cov)},
        thresholds={k.value: float(thresholds[k]) for k in prob.kinds},
        objective=float(prob.objective(theta)[0] * data.n),
        trace=trace,
        details={
            "reference_covariances": {k.value: float(v) for k, v in reference.items()},
            "config": asdict(cfg),
        },
    )
