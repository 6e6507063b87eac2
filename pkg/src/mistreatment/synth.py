"""Synthetic two-group Gaussian benchmarks.

Each setting draws 2,500 points from four bivariate Gaussians, one per
(sensitive group, label) cell. Every cell gets its own child stream of the
seed so the draw for one cell never depends on another.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset

COMPONENT_SIZE = 2500


@dataclass(frozen=True)
class GaussianSpec:
    mean: tuple[float, float]
    cov: tuple[tuple[float, float], tuple[float, float]]
    count: int
    label: int
    sensitive: int


def _component(mean, cov, label, sensitive, count=COMPONENT_SIZE):
    return GaussianSpec(tuple(mean), tuple(map(tuple, cov)), count, label, sensitive)


# Order within a setting: (z=0, y=+1), (z=1, y=+1), (z=0, y=-1), (z=1, y=-1).
SETTINGS: dict[int, tuple[GaussianSpec, ...]] = {
    # only the negative classes differ between groups
    1: (
        _component([2, 2], [[3, 1], [1, 3]], 1, 0),
        _component([2, 2], [[3, 1], [1, 3]], 1, 1),
        # printed as [3, 3; 1, 3], which is not symmetric
        _component([1, 1], [[3, 1], [1, 3]], -1, 0),
        _component([-2, -2], [[3, 1], [1, 3]], -1, 1),
    ),
    # group clusters shifted: FPR and FNR disparities of opposite sign
    2: (
        _component([2, 0], [[5, 1], [1, 5]], 1, 0),
        _component([2, 3], [[5, 1], [1, 5]], 1, 1),
        _component([-1, -3], [[5, 1], [1, 5]], -1, 0),
        _component([-1, 0], [[5, 1], [1, 5]], -1, 1),
    ),
    # z=0 is harder to classify: disparities of the same sign
    3: (
        _component([1, 2], [[5, 2], [2, 5]], 1, 0),
        _component([2, 3], [[10, 1], [1, 4]], 1, 1),
        _component([0, -1], [[7, 1], [1, 7]], -1, 0),
        _component([-5, 0], [[5, 1], [1, 5]], -1, 1),
    ),
}


def sample_gaussian(spec: GaussianSpec, rng: np.random.Generator) -> np.ndarray:
    mean = np.asarray(spec.mean, dtype=float)
    cov = np.asarray(spec.cov, dtype=float)
    if not np.allclose(cov, cov.T):
        raise ValueError("covariance must be symmetric")
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance must be positive definite") from exc
    std = rng.standard_normal((spec.count, mean.size))
    return mean + std @ L.T


def generate_setting(setting: int, seed: int) -> Dataset:
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}; expected one of {sorted(SETTINGS)}")
    specs = SETTINGS[setting]
    streams = np.random.SeedSequence(seed).spawn(len(specs) + 1)
    X, y, z = [], [], []
    for spec, ss in zip(specs, streams):
        X.append(sample_gaussian(spec, np.random.default_rng(ss)))
        y.append(np.full(spec.count, spec.label))
        z.append(np.full(spec.count, spec.sensitive))
    X, y, z = np.vstack(X), np.concatenate(y), np.concatenate(z)
    order = np.random.default_rng(streams[-1]).permutation(len(y))
    return Dataset(X[order], y[order], z[order], ("x1", "x2"))
