"""Immutable containers shared by the training and evaluation code.

Labels are always stored as -1/+1 and the sensitive attribute as 0/1.
Boundaries carry the intercept as their last coefficient, so every feature
vector is implicitly augmented with a trailing constant 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    sensitive: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValueError("features must be a 2-d array")
        y = np.asarray(self.labels)
        z = np.asarray(self.sensitive)
        n = X.shape[0]
        if n < 1:
            raise ValueError("dataset must contain at least one row")
        if y.shape != (n,) or z.shape != (n,):
            raise ValueError(
                f"length mismatch: features {n}, labels {y.shape}, sensitive {z.shape}"
            )
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError("labels must be -1 or +1")
        if not np.all(np.isin(z, (0, 1))):
            raise ValueError("sensitive values must be 0 or 1")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValueError(f"expected {X.shape[1]} feature names, got {len(names)}")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be distinct")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))
        object.__setattr__(self, "sensitive", _frozen(z.astype(np.int64)))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def augmented(self) -> np.ndarray:
        """Feature matrix with a trailing column of ones (N x (d+1))."""
        return np.hstack([self.features, np.ones((self.n, 1))])

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.sensitive[idx], self.feature_names)


@dataclass(frozen=True)
class GroupPartition:
    indices_z0: np.ndarray
    indices_z1: np.ndarray

    @property
    def n0(self) -> int:
        return len(self.indices_z0)

    @property
    def n1(self) -> int:
        return len(self.indices_z1)

    @property
    def n(self) -> int:
        return self.n0 + self.n1

    @property
    def zbar(self) -> float:
        return self.n1 / self.n


def partition_by_sensitive(data: Dataset) -> GroupPartition:
    z = data.sensitive
    return GroupPartition(_frozen(np.flatnonzero(z == 0)), _frozen(np.flatnonzero(z == 1)))


@dataclass(frozen=True, eq=False)
class Boundary:
    theta: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=float).ravel()
        if t.size < 1:
            raise ValueError("theta must hold at least the intercept")
        if not np.all(np.isfinite(t)):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "theta", _frozen(t))

    @property
    def weights(self) -> np.ndarray:
        return self.theta[:-1]

    @property
    def intercept(self) -> float:
        return float(self.theta[-1])

    @classmethod
    def zeros(cls, dim: int) -> "Boundary":
        return cls(np.zeros(dim + 1))

    def to_dict(self, feature_names: Sequence[str] | None = None) -> dict:
        out = {"theta": [float(v) for v in self.theta]}
        if feature_names is not None:
            out["feature_names"] = list(feature_names)
        return out


def _check_dim(b: Boundary, X: np.ndarray) -> None:
    if X.shape[-1] + 1 != b.theta.size:
        raise ValueError(
            f"dimension mismatch: boundary expects {b.theta.size - 1} features, got {X.shape[-1]}"
        )


def signed_distance(b: Boundary, x) -> float | np.ndarray:
    """theta^T [x; 1] for a single vector or row-wise for a matrix."""
    X = np.asarray(x, dtype=float)
    _check_dim(b, X)
    d = X @ b.weights + b.intercept
    return float(d) if X.ndim == 1 else d


def predict(b: Boundary, x) -> int | np.ndarray:
    d = signed_distance(b, x)
    if np.ndim(d) == 0:
        return 1 if d >= 0 else -1
    return np.where(d >= 0, 1, -1)
