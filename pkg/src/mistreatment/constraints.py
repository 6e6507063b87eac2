"""Covariance proxies for disparate mistreatment.

For a boundary theta and a sample (x, y, z) the misclassification measure is

    g(y, x) = min(0, s(y) * y * theta^T [x; 1])

where the selector s(y) is 1 for every sample (OMR), only for y = -1 (FPR) or
only for y = +1 (FNR). The proxy is the covariance between z and g over the
data. Splitting it by group gives

    cov = (-n1 * S0 + n0 * S1) / N**2,     S_k = sum of g over group k,

and since each g is concave in theta (a minimum of affine functions), the
z=0 term is convex and the z=1 term is concave. The trainer only relies on
this difference-of-convex structure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import Boundary, Dataset, GroupPartition, partition_by_sensitive


class MistreatmentKind(str, enum.Enum):
    OMR = "omr"
    FPR = "fpr"
    FNR = "fnr"

    @classmethod
    def parse(cls, value) -> "MistreatmentKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown mistreatment kind {value!r}") from None


def parse_kinds(text) -> tuple[MistreatmentKind, ...]:
    """Parse ``"fpr"``, ``"fpr,fnr"`` or ``"both"`` (a list also works)."""
    if isinstance(text, str):
        items = [t for t in text.replace(" ", "").split(",") if t]
    else:
        items = list(text)
    kinds: list[MistreatmentKind] = []
    for item in items:
        expanded = ["fpr", "fnr"] if str(item).lower() == "both" else [item]
        for k in expanded:
            kind = MistreatmentKind.parse(k)
            if kind not in kinds:
                kinds.append(kind)
    if not kinds:
        raise ValueError("at least one mistreatment kind is required")
    return tuple(kinds)


@dataclass(frozen=True)
class ConstraintSpec:
    """Which covariances to bound, and by how much.

    Give either absolute thresholds ``c`` or multipliers ``m`` in [0, 1];
    multipliers are resolved against the covariance of the unconstrained
    boundary. A scalar applies to every kind.
    """

    kinds: tuple[MistreatmentKind, ...]
    thresholds: dict | None = None
    multipliers: dict | None = None

    def __post_init__(self):
        kinds = parse_kinds(self.kinds)
        object.__setattr__(self, "kinds", kinds)
        if (self.thresholds is None) == (self.multipliers is None):
            raise ValueError("give exactly one of thresholds or multipliers")
        src = self.thresholds if self.thresholds is not None else self.multipliers
        if not isinstance(src, dict):
            src = {k: src for k in kinds}
        values = {MistreatmentKind.parse(k): float(v) for k, v in src.items()}
        missing = [k.value for k in kinds if k not in values]
        if missing:
            raise ValueError(f"no threshold given for {missing}")
        values = {k: values[k] for k in kinds}
        for v in values.values():
            if not np.isfinite(v) or v < 0:
                raise ValueError("thresholds and multipliers must be nonnegative")
            if self.multipliers is not None and v > 1:
                raise ValueError(f"multiplier {v} outside [0, 1]")
        name = "thresholds" if self.thresholds is not None else "multipliers"
        object.__setattr__(self, name, values)

    def resolve(self, reference: dict) -> dict:
        """Absolute thresholds; ``reference`` maps kind -> c* (needed for multipliers)."""
        if self.thresholds is not None:
            return dict(self.thresholds)
        return {k: m * abs(reference[k]) for k, m in self.multipliers.items()}


def _selector(kind: MistreatmentKind, y) -> np.ndarray:
    y = np.asarray(y)
    if kind is MistreatmentKind.OMR:
        return np.ones(y.shape)
    if kind is MistreatmentKind.FPR:
        return (1 - y) / 2
    return (1 + y) / 2


def g_value(kind, y: int, x, b: Boundary) -> float:
    kind = MistreatmentKind.parse(kind)
    if y not in (-1, 1):
        raise ValueError("label must be -1 or +1")
    x = np.asarray(x, dtype=float)
    d = float(x @ b.weights + b.intercept)
    return min(0.0, float(_selector(kind, y)) * y * d)


def _affine_terms(kind, data: Dataset) -> np.ndarray:
    """Rows a_i with g_i(theta) = min(0, a_i . theta)."""
    sel = _selector(kind, data.labels) * data.labels
    return data.augmented() * sel[:, None]


def g_vector(kind, data: Dataset, b: Boundary) -> np.ndarray:
    kind = MistreatmentKind.parse(kind)
    return np.minimum(0.0, _affine_terms(kind, data) @ b.theta)


def _require_both_groups(part: GroupPartition) -> None:
    if part.n0 == 0 or part.n1 == 0:
        raise ValueError("covariance constraints need both sensitive groups present")


def covariance(kind, data: Dataset, b: Boundary) -> float:
    """(1/N) sum (z - zbar) g over the data."""
    kind = MistreatmentKind.parse(kind)
    _require_both_groups(partition_by_sensitive(data))
    z = data.sensitive.astype(float)
    return float(np.mean((z - z.mean()) * g_vector(kind, data, b)))


def dc_group_sums(kind, data: Dataset, part: GroupPartition, b: Boundary) -> tuple[float, float]:
    _require_both_groups(part)
    g = g_vector(MistreatmentKind.parse(kind), data, b)
    return float(np.sum(g[part.indices_z0])), float(np.sum(g[part.indices_z1]))


def constraint_value(kind, data: Dataset, part: GroupPartition, b: Boundary) -> float:
    """-(n1/N) S0 + (n0/N) S1, i.e. N times the covariance."""
    s0, s1 = dc_group_sums(kind, data, part, b)
    return (-part.n1 * s0 + part.n0 * s1) / part.n


def constraint_subgradient(kind, data: Dataset, part: GroupPartition, b: Boundary) -> np.ndarray:
    """Subgradient of -(n1/N) S0 + (n0/N) S1; kinks (a_i . theta = 0) take the zero branch."""
    _require_both_groups(part)
    A = _affine_terms(MistreatmentKind.parse(kind), data)
    active = (A @ b.theta) < 0
    coef = np.where(data.sensitive == 0, -part.n1, part.n0) / part.n
    return A.T @ (coef * active)


@dataclass
class DCSplit:
    """Pieces of N * cov for one kind, ready for linearisation.

    ``convex(theta)`` is the z=0 part (n1/N) sum max(0, -a.theta) and
    ``concave(theta)`` the z=1 part (n0/N) sum min(0, a.theta), so
    ``convex + concave`` equals :func:`constraint_value`.
    """

    A0: np.ndarray
    A1: np.ndarray
    w0: float
    w1: float

    @classmethod
    def build(cls, kind, data: Dataset, part: GroupPartition) -> "DCSplit":
        _require_both_groups(part)
        A = _affine_terms(MistreatmentKind.parse(kind), data)
        return cls(A[part.indices_z0], A[part.indices_z1], part.n1 / part.n, part.n0 / part.n)

    def convex(self, theta):
        u = self.A0 @ theta
        val = self.w0 * np.sum(np.maximum(0.0, -u))
        grad = -self.w0 * (self.A0.T @ (u < 0))
        return float(val), grad

    def concave(self, theta):
        u = self.A1 @ theta
        val = self.w1 * np.sum(np.minimum(0.0, u))
        grad = self.w1 * (self.A1.T @ (u < 0))
        return float(val), grad

    def value(self, theta) -> float:
        return self.convex(theta)[0] + self.concave(theta)[0]
