import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mistreatment.constraints import (
    ConstraintSpec,
    DCSplit,
    MistreatmentKind,
    constraint_subgradient,
    constraint_value,
    covariance,
    dc_group_sums,
    g_value,
    g_vector,
    parse_kinds,
)
from mistreatment.data import Boundary, Dataset, partition_by_sensitive

from conftest import random_dataset

KINDS = list(MistreatmentKind)

# integer data so the covariance is rational; values checked against an
# exact Fraction loop over the per-sample definition
SMALL = Dataset(
    np.array([(1, 2), (-1, 0), (2, -1), (0, 1), (3, 1), (-2, -2), (1, -1)], dtype=float),
    np.array([1, -1, -1, 1, 1, -1, 1]),
    np.array([0, 0, 1, 1, 0, 1, 1]),
)
SMALL_THETA = Boundary([1.0, -2.0, 1.0])
EXACT = {"omr": -19 / 49, "fpr": -24 / 49, "fnr": 5 / 49}


@pytest.mark.parametrize("kind", ["omr", "fpr", "fnr"])
def test_covariance_exact(kind):
    assert covariance(kind, SMALL, SMALL_THETA) == pytest.approx(EXACT[kind], abs=1e-15)


def test_g_value_selectors():
    b = Boundary([1.0, 0.0])
    assert g_value("fpr", -1, [2.0], b) == -2.0  # negative predicted positive
    assert g_value("fpr", 1, [-2.0], b) == 0.0  # positives ignored
    assert g_value("fnr", 1, [-2.0], b) == -2.0
    assert g_value("omr", 1, [3.0], b) == 0.0  # correct side
    with pytest.raises(ValueError):
        g_value("fpr", 0, [1.0], b)


def test_single_group_rejected():
    d = Dataset([[1.0], [2.0]], [1, -1], [0, 0])
    with pytest.raises(ValueError):
        covariance("fpr", d, Boundary([1.0, 0.0]))
    with pytest.raises(ValueError):
        DCSplit.build("fpr", d, partition_by_sensitive(d))


def test_parse_kinds():
    assert parse_kinds("both") == (MistreatmentKind.FPR, MistreatmentKind.FNR)
    assert parse_kinds("FNR, fpr") == (MistreatmentKind.FNR, MistreatmentKind.FPR)
    with pytest.raises(ValueError):
        parse_kinds("fdr")
    with pytest.raises(ValueError):
        parse_kinds("")


def test_constraint_spec():
    s = ConstraintSpec("fpr,fnr", multipliers=0.5)
    ref = {MistreatmentKind.FPR: -0.2, MistreatmentKind.FNR: 0.1}
    assert s.resolve(ref) == {MistreatmentKind.FPR: 0.1, MistreatmentKind.FNR: 0.05}
    assert ConstraintSpec("fpr", thresholds={"fpr": 0.3}).resolve({}) == {MistreatmentKind.FPR: 0.3}
    for bad in (dict(multipliers=1.5), dict(multipliers=-0.1), dict(), dict(thresholds=0.1, multipliers=0.1)):
        with pytest.raises(ValueError):
            ConstraintSpec("fpr", **bad)
    with pytest.raises(ValueError):
        ConstraintSpec("fpr,fnr", thresholds={"fpr": 0.1})


seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.sampled_from(KINDS))
def test_group_decomposition_identity(seed, kind):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, n=int(rng.integers(4, 80)), d=int(rng.integers(1, 5)), balance=rng.uniform(0.1, 0.9))
    b = Boundary(rng.normal(size=d.dim + 1))
    part = partition_by_sensitive(d)
    s0, s1 = dc_group_sums(kind, d, part, b)
    group_form = (-part.n1 * s0 + part.n0 * s1) / part.n**2
    assert abs(group_form - covariance(kind, d, b)) <= 1e-12
    assert constraint_value(kind, d, part, b) == pytest.approx(part.n * covariance(kind, d, b), abs=1e-10)


@given(seeds)
def test_fpr_plus_fnr_equals_omr(seed):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, n=40, d=3)
    b = Boundary(rng.normal(size=4))
    assert np.array_equal(g_vector("fpr", d, b) + g_vector("fnr", d, b), g_vector("omr", d, b))
    total = covariance("fpr", d, b) + covariance("fnr", d, b)
    assert total == pytest.approx(covariance("omr", d, b), abs=1e-14)


@given(seeds, st.sampled_from(KINDS))
def test_subgradient_matches_finite_differences(seed, kind):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, n=30, d=2)
    part = partition_by_sensitive(d)
    theta = rng.normal(size=3)
    margins = np.abs(d.augmented() @ theta)
    if margins.min() < 1e-3:
        return  # too close to a kink for a clean central difference
    h = 1e-7
    grad = constraint_subgradient(kind, d, part, Boundary(theta))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (
            constraint_value(kind, d, part, Boundary(theta + e)) - constraint_value(kind, d, part, Boundary(theta - e))
        ) / (2 * h)
        assert fd == pytest.approx(grad[j], abs=1e-6)


def test_subgradient_example_single_misclassified_negative():
    # one z=1 negative misclassified for FPR: gradient is (n0/N) * y * x~
    d = Dataset([[1.0], [-1.0], [2.0], [-3.0]], [1, -1, -1, 1], [0, 0, 1, 1])
    part = partition_by_sensitive(d)
    b = Boundary([1.0, 0.0])
    grad = constraint_subgradient("fpr", d, part, b)
    assert np.allclose(grad, 0.5 * -1 * np.array([2.0, 1.0]))


@given(seeds, st.sampled_from(KINDS))
def test_dc_split_pieces(seed, kind):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, n=50, d=2)
    part = partition_by_sensitive(d)
    sp = DCSplit.build(kind, d, part)
    t1, t2 = rng.normal(size=3), rng.normal(size=3)
    assert sp.value(t1) == pytest.approx(constraint_value(kind, d, part, Boundary(t1)), abs=1e-12)
    # convex part lies above its tangents, concave part below
    v1, g1 = sp.convex(t1)
    assert sp.convex(t2)[0] >= v1 + g1 @ (t2 - t1) - 1e-12
    c1, h1 = sp.concave(t1)
    assert sp.concave(t2)[0] <= c1 + h1 @ (t2 - t1) + 1e-12
