"""Group-wise error rates and disparity measures.

Every disparity is oriented as (value at z=0) - (value at z=1). A rate whose
denominator is empty is reported as ``None`` rather than 0, and any disparity
touching such a rate is ``None`` as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RATES = ("omr", "fpr", "fnr", "fdr", "for", "positive_rate")
DISPARITIES = {
    "d_omr": "omr",
    "d_fpr": "fpr",
    "d_fnr": "fnr",
    "d_fdr": "fdr",
    "d_for": "for",
    "d_impact": "positive_rate",
}
CELLS = ("tp", "fp", "tn", "fn")


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def _diff(a: float | None, b: float | None) -> float | None:
    if a is None or b is None:
        return None
    return a - b


@dataclass(frozen=True)
class GroupCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def size(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def rates(self) -> dict[str, float | None]:
        tp, fp, tn, fn = self.tp, self.fp, self.tn, self.fn
        return {
            "omr": _ratio(fp + fn, self.size),
            "fpr": _ratio(fp, fp + tn),
            "fnr": _ratio(fn, fn + tp),
            "fdr": _ratio(fp, fp + tp),
            "for": _ratio(fn, fn + tn),
            "positive_rate": _ratio(tp + fp, self.size),
        }


@dataclass(frozen=True)
class GroupErrorReport:
    counts: tuple[GroupCounts, GroupCounts]
    accuracy: float

    def rate(self, name: str, group: int) -> float | None:
        return self.counts[group].rates()[name]

    def disparity(self, name: str) -> float | None:
        """Disparity by key (``"d_fpr"``) or by rate name (``"fpr"``)."""
        rate = DISPARITIES.get(name, name)
        return _diff(self.rate(rate, 0), self.rate(rate, 1))

    @property
    def d_fpr(self) -> float | None:
        return self.disparity("fpr")

    @property
    def d_fnr(self) -> float | None:
        return self.disparity("fnr")

    @property
    def d_impact(self) -> float | None:
        return self.disparity("positive_rate")

    def to_dict(self) -> dict:
        out: dict = {"accuracy": self.accuracy}
        for g in (0, 1):
            rates = self.counts[g].rates()
            for name in RATES:
                out[f"{name}_z{g}"] = rates[name]
            for cell in CELLS:
                out[f"{cell}_z{g}"] = getattr(self.counts[g], cell)
        for key in DISPARITIES:
            out[key] = self.disparity(key)
        return out


REPORT_KEYS = tuple(
    ["accuracy"]
    + [f"{name}_z{g}" for g in (0, 1) for name in RATES + CELLS]
    + list(DISPARITIES)
)


def _validate(truth, pred, sensitive):
    y = np.asarray(truth)
    p = np.asarray(pred)
    z = np.asarray(sensitive)
    if not (y.shape == p.shape == z.shape) or y.ndim != 1:
        raise ValueError(f"length mismatch: truth {y.shape}, pred {p.shape}, sensitive {z.shape}")
    if not np.all(np.isin(y, (-1, 1))) or not np.all(np.isin(p, (-1, 1))):
        raise ValueError("labels and predictions must be -1 or +1")
    if not np.all(np.isin(z, (0, 1))):
        raise ValueError("sensitive values must be 0 or 1")
    return y, p, z


def error_report(truth, pred, sensitive) -> GroupErrorReport:
    y, p, z = _validate(truth, pred, sensitive)
    counts = []
    for g in (0, 1):
        m = z == g
        yg, pg = y[m], p[m]
        counts.append(
            GroupCounts(
                tp=int(np.sum((yg == 1) & (pg == 1))),
                fp=int(np.sum((yg == -1) & (pg == 1))),
                tn=int(np.sum((yg == -1) & (pg == -1))),
                fn=int(np.sum((yg == 1) & (pg == -1))),
            )
        )
    accuracy = float(np.mean(y == p)) if y.size else float("nan")
    return GroupErrorReport(tuple(counts), accuracy)


def disparate_impact_gap(pred, sensitive) -> float | None:
    """P(yhat=+1 | z=0) - P(yhat=+1 | z=1); ``None`` if a group is empty."""
    p = np.asarray(pred)
    z = np.asarray(sensitive)
    if p.shape != z.shape:
        raise ValueError("length mismatch")
    if not np.all(np.isin(p, (-1, 1))) or not np.all(np.isin(z, (0, 1))):
        raise ValueError("invalid symbols")
    if not np.any(z == 0) or not np.any(z == 1):
        return None
    return float(np.mean(p[z == 0] == 1) - np.mean(p[z == 1] == 1))


def average_reports(reports: list[dict]) -> dict:
    """Key-wise mean of flat report dicts, skipping absent values."""
    out = {}
    for key in reports[0]:
        vals = [r[key] for r in reports if r.get(key) is not None]
        out[key] = float(np.mean(vals)) if vals else None
    return out
