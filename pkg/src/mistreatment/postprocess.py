"""Group-specific decision thresholds on top of a fixed scorer.

This comparator needs the sensitive attribute at decision time, so every rule
and report it produces carries ``uses_sensitive_at_decision = True``.

A group's rule predicts +1 when ``score >= t``. A randomized rule holds two
thresholds and a weight p: each sample uses the first threshold with
probability p and the second otherwise. Thresholds ``-inf`` and ``+inf`` are
the trivial accept-all and reject-all rules.

Single-kind constraints are fitted by exhaustive search over per-group
threshold pairs. For FPR and FNR together the fitter also tries the randomized
equal-odds construction: both groups are moved to a common (FPR, FNR) point on
the upper envelope of their lower ROC hulls. The best expected accuracy wins.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .constraints import MistreatmentKind, parse_kinds
from .metrics import error_report

_CHUNK = 1 << 22


@dataclass(frozen=True)
class GroupRule:
    thresholds: tuple[float, float]
    weight: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("mixture weight must lie in [0, 1]")
        if any(math.isnan(t) for t in self.thresholds):
            raise ValueError("thresholds must not be NaN")

    @classmethod
    def single(cls, t: float) -> "GroupRule":
        return cls((float(t), float(t)), 1.0)

    @property
    def randomized(self) -> bool:
        return 0.0 < self.weight < 1.0 and self.thresholds[0] != self.thresholds[1]


@dataclass(frozen=True)
class ThresholdRule:
    groups: tuple[GroupRule, GroupRule]
    kinds: tuple[MistreatmentKind, ...]
    epsilon: float
    feasible: bool = True
    expected: dict | None = None
    uses_sensitive_at_decision: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kinds", parse_kinds(self.kinds))

    def to_dict(self) -> dict:
        def enc(t):
            return "+inf" if t == math.inf else "-inf" if t == -math.inf else float(t)

        return {
            "kinds": [k.value for k in self.kinds],
            "epsilon": self.epsilon,
            "feasible": self.feasible,
            "uses_sensitive_at_decision": True,
            "groups": [
                {"thresholds": [enc(t) for t in g.thresholds], "weight": g.weight} for g in self.groups
            ],
            "expected": self.expected,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdRule":
        def dec(t):
            return {"+inf": math.inf, "-inf": -math.inf}.get(t, t) if isinstance(t, str) else float(t)

        groups = tuple(GroupRule(tuple(dec(t) for t in g["thresholds"]), float(g["weight"])) for g in d["groups"])
        if len(groups) != 2:
            raise ValueError("a threshold rule needs exactly two groups")
        return cls(groups, parse_kinds(d["kinds"]), float(d["epsilon"]), bool(d.get("feasible", True)), d.get("expected"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class _Roc:
    """Operating points of one group for thresholds -inf, midpoints..., +inf."""

    thresholds: np.ndarray
    fpr: np.ndarray
    fnr: np.ndarray
    correct: np.ndarray
    n_neg: int
    n_pos: int


def _roc(scores: np.ndarray, truth: np.ndarray) -> _Roc:
    u = np.unique(scores)
    thr = np.concatenate([[-np.inf], (u[:-1] + u[1:]) / 2, [np.inf]])
    pos = np.sort(scores[truth == 1])
    neg = np.sort(scores[truth == -1])
    # positives / negatives predicted +1 at each threshold
    tp = pos.size - np.searchsorted(pos, thr, side="left")
    fp = neg.size - np.searchsorted(neg, thr, side="left")
    fn = pos.size - tp
    tn = neg.size - fp
    with np.errstate(invalid="ignore", divide="ignore"):
        fpr = fp / neg.size if neg.size else np.full(thr.size, np.nan)
        fnr = fn / pos.size if pos.size else np.full(thr.size, np.nan)
    return _Roc(thr, np.asarray(fpr, float), np.asarray(fnr, float), tp + tn, neg.size, pos.size)


def _rate(roc: _Roc, kind: MistreatmentKind) -> np.ndarray:
    return roc.fpr if kind is MistreatmentKind.FPR else roc.fnr


def _deterministic(r0: _Roc, r1: _Roc, kinds, epsilon):
    """Best (i, j) over all threshold pairs meeting every constraint, or None."""
    best, best_val = None, -1
    rows = max(1, _CHUNK // max(1, r1.thresholds.size))
    for start in range(0, r0.thresholds.size, rows):
        sl = slice(start, start + rows)
        ok = np.ones((r0.thresholds[sl].size, r1.thresholds.size), dtype=bool)
        for k in kinds:
            ok &= np.abs(_rate(r0, k)[sl, None] - _rate(r1, k)[None, :]) <= epsilon + 1e-12
        if not ok.any():
            continue
        val = np.where(ok, r0.correct[sl, None] + r1.correct[None, :], -1)
        flat = int(np.argmax(val))
        i, j = divmod(flat, r1.thresholds.size)
        if val[i, j] > best_val:
            best_val, best = int(val[i, j]), (start + i, j)
    return best


def _lower_hull(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of the points, ordered by increasing x."""
    order = np.lexsort((y, x))
    hull: list[int] = []
    for i in order:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        if hull and x[hull[-1]] == x[i]:
            continue
        hull.append(int(i))
    return np.array(hull)


def _hull_eval(hx, hy, x):
    return np.interp(x, hx, hy)


def _common_point(r0: _Roc, r1: _Roc):
    """Common (FPR, FNR) minimising expected errors over both groups."""
    hulls = []
    for r in (r0, r1):
        h = _lower_hull(r.fpr, r.fnr)
        hulls.append((r.fpr[h], r.fnr[h], h))
    xs = set(np.concatenate([hulls[0][0], hulls[1][0]]).tolist())
    grid = np.array(sorted(xs))
    # add crossings of the two hulls between consecutive breakpoints
    d = _hull_eval(hulls[0][0], hulls[0][1], grid) - _hull_eval(hulls[1][0], hulls[1][1], grid)
    for k in np.flatnonzero(d[:-1] * d[1:] < 0):
        t = d[k] / (d[k] - d[k + 1])
        xs.add(float(grid[k] + t * (grid[k + 1] - grid[k])))
    grid = np.array(sorted(xs))
    env = np.maximum(_hull_eval(hulls[0][0], hulls[0][1], grid), _hull_eval(hulls[1][0], hulls[1][1], grid))
    a = r0.n_neg + r1.n_neg
    b = r0.n_pos + r1.n_pos
    k = int(np.argmin(a * grid + b * env))
    return (float(grid[k]), float(env[k])), hulls


def _mix_on_hull(hx, hy, hidx, x):
    """Two hull vertices and weight whose mixture sits on the hull at FPR x."""
    k = int(np.searchsorted(hx, x, side="right")) - 1
    k = min(max(k, 0), hx.size - 1)
    if k == hx.size - 1 or hx[k] == x:
        return int(hidx[k]), int(hidx[k]), 1.0
    w = (hx[k + 1] - x) / (hx[k + 1] - hx[k])
    return int(hidx[k]), int(hidx[k + 1]), float(w)


def _mix_from_corner(r: _Roc, target):
    """Mix a trivial rule with one operating point to land nearest the target."""
    P = np.column_stack([r.fpr, r.fnr])
    q = np.asarray(target)
    best = None
    for c in (0, P.shape[0] - 1):
        v = P - P[c]
        vv = np.einsum("ij,ij->i", v, v)
        with np.errstate(invalid="ignore", divide="ignore"):
            lam = np.clip(np.where(vv > 0, (v @ (q - P[c])) / vv, 0.0), 0.0, 1.0)
        err = np.max(np.abs(P[c] + lam[:, None] * v - q), axis=1)
        j = int(np.argmin(err))
        if best is None or err[j] < best[0]:
            # lam weights the operating point j, 1 - lam the corner
            best = (float(err[j]), j, c, float(lam[j]))
    _, j, c, lam = best
    return j, c, lam


def _expected(r: _Roc, i, j, w):
    return (
        w * r.fpr[i] + (1 - w) * r.fpr[j],
        w * r.fnr[i] + (1 - w) * r.fnr[j],
        w * r.correct[i] + (1 - w) * r.correct[j],
    )


def _randomized(r0: _Roc, r1: _Roc, epsilon):
    target, hulls = _common_point(r0, r1)
    picks = []
    for r, (hx, hy, hidx) in zip((r0, r1), hulls):
        if abs(_hull_eval(hx, hy, target[0]) - target[1]) <= 1e-12:
            picks.append(_mix_on_hull(hx, hy, hidx, target[0]))
        else:
            picks.append(_mix_from_corner(r, target))
    e0 = _expected(r0, *picks[0])
    e1 = _expected(r1, *picks[1])
    if abs(e0[0] - e1[0]) > epsilon or abs(e0[1] - e1[1]) > epsilon:
        return None
    return picks, e0[2] + e1[2]


def fit_group_thresholds(scores, truth, sensitive, kinds, epsilon: float, randomize: bool = True) -> ThresholdRule:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(truth)
    z = np.asarray(sensitive)
    if not (s.shape == y.shape == z.shape) or s.ndim != 1:
        raise ValueError("scores, truth and sensitive must be equal-length vectors")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not np.all(np.isin(z, (0, 1))) or not np.all(np.isin(y, (-1, 1))):
        raise ValueError("truth must be -1/+1 and sensitive 0/1")
    if not (np.any(z == 0) and np.any(z == 1)):
        raise ValueError("both sensitive groups must be present")
    if not epsilon >= 0:
        raise ValueError("epsilon must be nonnegative")
    kinds = parse_kinds(kinds)
    if MistreatmentKind.OMR in kinds:
        raise ValueError("threshold fitting supports fpr and fnr only")
    r0, r1 = _roc(s[z == 0], y[z == 0]), _roc(s[z == 1], y[z == 1])
    for k in kinds:
        if np.isnan(_rate(r0, k)).any() or np.isnan(_rate(r1, k)).any():
            raise ValueError(f"{k.value} undefined: a group lacks samples of the needed label")

    det = _deterministic(r0, r1, kinds, epsilon)
    best_rule, best_val = None, -1.0
    if det is not None:
        i, j = det
        best_rule = (GroupRule.single(r0.thresholds[i]), GroupRule.single(r1.thresholds[j]))
        best_val = float(r0.correct[i] + r1.correct[j])
    if randomize and len(kinds) == 2:
        rnd = _randomized(r0, r1, epsilon)
        if rnd is not None and rnd[1] > best_val + 1e-9:
            picks, best_val = rnd
            best_rule = tuple(
                GroupRule((float(r.thresholds[a]), float(r.thresholds[b])), w)
                for r, (a, b, w) in zip((r0, r1), picks)
            )
    if best_rule is None:
        return ThresholdRule(
            (GroupRule.single(-math.inf), GroupRule.single(-math.inf)), kinds, epsilon, feasible=False
        )
    exp = {}
    for g, (r, rule) in enumerate(zip((r0, r1), best_rule)):
        i = int(np.searchsorted(r.thresholds, rule.thresholds[0]))
        j = int(np.searchsorted(r.thresholds, rule.thresholds[1]))
        f, n, _ = _expected(r, i, j, rule.weight)
        exp[f"fpr_z{g}"], exp[f"fnr_z{g}"] = float(f), float(n)
    exp["accuracy"] = best_val / s.size
    return ThresholdRule(best_rule, kinds, epsilon, True, exp)


def apply_group_thresholds(rule: ThresholdRule, scores, sensitive, rng_seed: int = 0) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    z = np.asarray(sensitive)
    if s.shape != z.shape:
        raise ValueError("scores and sensitive must have equal length")
    bad = ~np.isin(z, (0, 1))
    if bad.any():
        raise ValueError(f"unseen sensitive value {z[bad][0]!r}")
    u = np.random.default_rng(rng_seed).random(s.size)
    t = np.empty(s.size)
    for g, gr in enumerate(rule.groups):
        m = z == g
        t[m] = np.where(u[m] < gr.weight, gr.thresholds[0], gr.thresholds[1])
    return np.where(s >= t, 1, -1)


def postprocess_report(rule: ThresholdRule, scores, truth, sensitive, rng_seed: int = 0) -> dict:
    pred = apply_group_thresholds(rule, scores, sensitive, rng_seed)
    out = error_report(truth, pred, sensitive).to_dict()
    out["uses_sensitive_at_decision"] = True
    return out
