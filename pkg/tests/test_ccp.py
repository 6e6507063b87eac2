import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mistreatment.ccp as ccp
from mistreatment.ccp import CcpConfig, _Problem, train_constrained
from mistreatment.constraints import ConstraintSpec, MistreatmentKind, covariance
from mistreatment.data import Dataset, predict
from mistreatment.logistic import fit_logistic

from conftest import random_dataset


def oracle_data():
    rng = np.random.default_rng(7)
    X = np.vstack([
        rng.normal([1, 1], 1.2, (50, 2)),
        rng.normal([1, 2], 1.2, (50, 2)),
        rng.normal([-1, -1], 1.2, (50, 2)),
        rng.normal([1, -1], 1.2, (50, 2)),
    ])
    y = np.repeat([1, 1, -1, -1], 50)
    z = np.tile(np.repeat([0, 1], 25), 4)
    return Dataset(X, y, z)


# Feasible minimum of a dense (angle 0.5 deg, radius, intercept) grid search,
# and the unconstrained optimum, for |cov_fpr| <= 0.3 |c*| on oracle_data().
GRID_BEST_NLL = 65.86848576245107
UNCONSTRAINED_NLL = 64.28077643832921
C_STAR = -0.0011063634779343151


def test_beats_grid_oracle_and_respects_lower_bound():
    d = oracle_data()
    c = 0.3 * abs(C_STAR)
    r = train_constrained(d, ConstraintSpec("fpr", thresholds=c))
    assert r.converged
    assert abs(r.final_covariances["fpr"]) <= c + 1e-4
    assert UNCONSTRAINED_NLL - 1e-6 <= r.objective <= GRID_BEST_NLL
    assert r.details["reference_covariances"]["fpr"] == pytest.approx(C_STAR, rel=1e-6)


def test_linearisation_exact_at_expansion_point():
    d = random_dataset(np.random.default_rng(4), n=80)
    prob = _Problem(d, [MistreatmentKind.FPR, MistreatmentKind.FNR], {MistreatmentKind.FPR: 0.0, MistreatmentKind.FNR: 0.0}, 0.0)
    rng = np.random.default_rng(5)
    for _ in range(10):
        tk = rng.normal(size=3)
        vals, _ = prob.convexified(tk)(tk)
        cov = prob.covariances(tk)
        assert np.allclose(vals, np.column_stack([cov, -cov]).ravel(), rtol=0, atol=1e-15)
        # away from the expansion point the surrogate is an upper bound
        t = tk + rng.normal(size=3)
        vals, _ = prob.convexified(tk)(t)
        cov = prob.covariances(t)
        assert np.all(vals >= np.column_stack([cov, -cov]).ravel() - 1e-12)


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.sampled_from(["fpr", "fnr", "omr", "fpr,fnr"]), st.floats(0.0, 0.8))
def test_merit_monotone_and_exit_feasible(seed, kinds, m):
    d = random_dataset(np.random.default_rng(seed), n=120)
    r = train_constrained(d, ConstraintSpec(kinds, multipliers=m), cfg=CcpConfig(max_outer_iters=40))
    assert len(r.trace) == r.outer_iterations
    for step in r.trace:
        assert step["merit_after"] <= step["merit_before"] + 1e-7
    assert all(v >= 0 for v in r.final_slacks.values())
    if r.converged:
        for k, c in r.thresholds.items():
            assert abs(r.final_covariances[k]) <= c + 1e-4


def test_inactive_constraint_reproduces_unconstrained():
    d = random_dataset(np.random.default_rng(11), n=300)
    base = fit_logistic(d)
    r = train_constrained(d, ConstraintSpec("fpr", multipliers=1.0))
    acc = lambda b: np.mean(predict(b, d.features) == d.labels)
    assert abs(acc(r.boundary) - acc(base.boundary)) <= 0.01
    c_star = abs(covariance("fpr", d, base.boundary))
    assert abs(abs(r.final_covariances["fpr"]) - c_star) <= 0.05 * c_star


def test_bit_deterministic():
    d = random_dataset(np.random.default_rng(2), n=150)
    spec = ConstraintSpec("fpr,fnr", multipliers=0.2)
    a = train_constrained(d, spec, cfg=CcpConfig(init="random", seed=3))
    b = train_constrained(d, spec, cfg=CcpConfig(init="random", seed=3))
    assert np.array_equal(a.boundary.theta, b.boundary.theta)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_report_serialises():
    d = random_dataset(np.random.default_rng(1), n=100)
    r = train_constrained(d, ConstraintSpec("both", multipliers=0.5))
    out = json.loads(json.dumps(r.to_dict(d.feature_names)))
    assert set(out["final_slacks"]) == {"fpr_upper", "fpr_lower", "fnr_upper", "fnr_lower"}
    assert set(out["final_covariances"]) == {"fpr", "fnr"}
    assert out["boundary"]["feature_names"] == ["x1", "x2"]


def test_errors(monkeypatch):
    d = Dataset([[1.0], [2.0], [3.0]], [1, -1, 1], [0, 0, 0])
    with pytest.raises(ValueError):
        train_constrained(d, ConstraintSpec("fpr", multipliers=0.0))
    with pytest.raises(ValueError):
        CcpConfig(mu=1.0)
    with pytest.raises(ValueError):
        CcpConfig(tau0=2.0, tau_max=1.0)

    class Bad:
        x = np.full(3 + 2, np.nan)
        status = 0

    monkeypatch.setattr(ccp, "minimize", lambda *a, **k: Bad())
    with pytest.raises(FloatingPointError):
        train_constrained(random_dataset(np.random.default_rng(0)), ConstraintSpec("fpr", multipliers=0.0))
